# utils/qcore/__init__.py
# Quantum-core paketi: types, ops, SDP layer, codec, constants, exceptions, metrics
from .qcore_exceptions import QCoreError
from .qcore_types import DensityOperator, PureState, SystemLayout

__all__ = ['DensityOperator', 'PureState', 'QCoreError', 'SystemLayout']
