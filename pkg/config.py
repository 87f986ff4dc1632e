"""config.py - toolkit configuration management

Ambient settings of the merging toolkit (logging, SDP backend, size limits,
concurrency). Default değerler ile gelir, .env dosyasındaki değerlerle override
edilir. Experiment parameters (state, eps, K, L, samples, seed) are NOT read
from the environment; they come from the JSON experiment file and CLI flags.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from dotenv import load_dotenv

from utils.qcore.qcore_constants import (
    BUILTIN_STATES,
    COMMANDS,
    DEFAULT_CONVERGENCE_MAX_DIM,
    DEFAULT_MAX_PROTOCOL_DIM,
    DEFAULT_SAMPLES,
    DEFAULT_SPLIT,
    PLAN_MODES,
    SDP_DEFAULT_MAX_ITER,
    SDP_DEFAULT_TOL,
    SDP_SOLVERS,
    STOCHASTIC_COMMANDS,
)
from utils.qcore.qcore_exceptions import ExperimentConfigError

# Environment variables'ı yükle
load_dotenv()

logger = logging.getLogger(__name__)
logger.setLevel(logging.getLevelName(os.getenv("LOG_LEVEL", "INFO")))

# Global cache instance
_CONFIG_INSTANCE: Optional["ToolkitConfig"] = None


@dataclass
class SolverConfig:
    """SDP backend ayarları"""
    SDP_SOLVER: str = field(default_factory=lambda: os.getenv("SDP_SOLVER", "CLARABEL").upper())
    SDP_FALLBACK_SOLVER: str = field(default_factory=lambda: os.getenv("SDP_FALLBACK_SOLVER", "SCS").upper())
    SDP_TOL: float = field(default_factory=lambda: float(os.getenv("SDP_TOL", str(SDP_DEFAULT_TOL))))
    SDP_MAX_ITER: int = field(default_factory=lambda: int(os.getenv("SDP_MAX_ITER", str(SDP_DEFAULT_MAX_ITER))))
    SDP_VERBOSE: bool = field(default_factory=lambda: os.getenv("SDP_VERBOSE", "false").lower() == "true")


@dataclass
class ProtocolConfig:
    """Size limits for protocol simulation and experiments"""
    # Amplitude cap for the post-measurement tensor of one protocol run
    MAX_PROTOCOL_DIM: int = field(default_factory=lambda: int(os.getenv("MAX_PROTOCOL_DIM", str(DEFAULT_MAX_PROTOCOL_DIM))))
    CONVERGENCE_MAX_DIM: int = field(default_factory=lambda: int(os.getenv("CONVERGENCE_MAX_DIM", str(DEFAULT_CONVERGENCE_MAX_DIM))))
    DEFAULT_SAMPLES: int = field(default_factory=lambda: int(os.getenv("DEFAULT_SAMPLES", str(DEFAULT_SAMPLES))))


@dataclass
class ToolkitConfig:
    """Merging toolkit yapılandırma sınıfı."""

    # ========================
    # ⚙️ TECHNICAL SETTINGS
    # ========================
    DEBUG: bool = field(default_factory=lambda: os.getenv("DEBUG", "false").lower() == "true")
    LOG_LEVEL: str = field(default_factory=lambda: os.getenv("LOG_LEVEL", "INFO"))
    MAX_WORKERS: int = field(default_factory=lambda: int(os.getenv("MAX_WORKERS", "4")))

    # SDP için alt config nesnesi
    SOLVER: SolverConfig = field(default_factory=SolverConfig)

    # Protokol limitleri için alt config nesnesi
    PROTOCOL: ProtocolConfig = field(default_factory=ProtocolConfig)

    @classmethod
    def load(cls) -> "ToolkitConfig":
        """Environment'dan config yükler."""
        return cls()

    def validate(self) -> bool:
        """Config değerlerini doğrular; hatalar ExperimentConfigError olarak yükseltilir."""
        errors: List[str] = []

        if self.LOG_LEVEL.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            errors.append(f"❌ LOG_LEVEL geçersiz: {self.LOG_LEVEL}")
        if self.MAX_WORKERS < 1:
            errors.append("❌ MAX_WORKERS >= 1 olmalı")

        if self.SOLVER.SDP_SOLVER not in SDP_SOLVERS:
            errors.append(f"❌ SDP_SOLVER must be one of {SDP_SOLVERS}")
        if self.SOLVER.SDP_FALLBACK_SOLVER not in SDP_SOLVERS:
            errors.append(f"❌ SDP_FALLBACK_SOLVER must be one of {SDP_SOLVERS}")
        if not 0 < self.SOLVER.SDP_TOL < 1:
            errors.append("❌ SDP_TOL must lie in (0, 1)")
        if self.SOLVER.SDP_MAX_ITER < 1:
            errors.append("❌ SDP_MAX_ITER >= 1 olmalı")

        if self.PROTOCOL.MAX_PROTOCOL_DIM < 1:
            errors.append("❌ MAX_PROTOCOL_DIM >= 1 olmalı")
        if self.PROTOCOL.CONVERGENCE_MAX_DIM < 1:
            errors.append("❌ CONVERGENCE_MAX_DIM >= 1 olmalı")
        if self.PROTOCOL.DEFAULT_SAMPLES < 2:
            errors.append("❌ DEFAULT_SAMPLES >= 2 olmalı")

        if errors:
            logger.critical("Config validation hatası:\n%s", "\n".join(errors))
            raise ExperimentConfigError("; ".join(errors))

        return True

    def to_dict(self) -> Dict[str, Any]:
        """Config'i dict olarak döndürür (manifest/log amaçlı)."""
        return asdict(self)


def reload_config() -> ToolkitConfig:
    """Config'i yeniden yükler ve cache'i temizler."""
    global _CONFIG_INSTANCE
    _CONFIG_INSTANCE = None
    logger.info("🔄 Config cache temizlendi, yeniden yükleniyor...")
    return get_config_sync()


def get_config_sync() -> ToolkitConfig:
    """Sync config instance'ını döndürür."""
    global _CONFIG_INSTANCE
    if _CONFIG_INSTANCE is None:
        config = ToolkitConfig.load()
        config.validate()
        _CONFIG_INSTANCE = config
        logger.debug("✅ Toolkit config yüklendi ve doğrulandı")

        if logger.isEnabledFor(logging.DEBUG):
            logger.debug(f"Config: {_CONFIG_INSTANCE.to_dict()}")

    return _CONFIG_INSTANCE


async def get_config() -> ToolkitConfig:
    """Global config instance'ını döndürür (async wrapper)."""
    return get_config_sync()


def get_solver_config() -> Dict[str, Any]:
    """SDP backend ayarlarını döndürür."""
    config = get_config_sync()
    return {
        "solver": config.SOLVER.SDP_SOLVER,
        "fallback": config.SOLVER.SDP_FALLBACK_SOLVER,
        "tol": config.SOLVER.SDP_TOL,
        "max_iter": config.SOLVER.SDP_MAX_ITER,
        "verbose": config.SOLVER.SDP_VERBOSE,
    }


# ========================
# 🧪 EXPERIMENT CONFIG
# ========================
@dataclass
class ExperimentConfig:
    """
    One experiment run, read from the JSON experiment file (CLI flags override seed/out/samples).

    Bilinmeyen komut veya state hesaplamadan önce reddedilir; stochastic komutlar seed ister.
    """
    command: str
    state: Optional[str] = None
    state_id: Optional[str] = None
    seed: Optional[int] = None
    out: str = "results"
    eps: Union[float, List[float], None] = None
    L: Union[int, List[int], None] = None
    K: Optional[int] = None
    samples: Optional[int] = None
    n_max: int = 3
    mode: str = "nonsmooth"
    runs: int = 1
    costs: Optional[List[int]] = None
    split: List[str] = field(default_factory=lambda: list(DEFAULT_SPLIT))
    grid: Optional[Dict[str, Any]] = None

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ExperimentConfigError("experiment config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ExperimentConfigError(f"unknown experiment keys: {unknown}")
        if "command" not in doc:
            raise ExperimentConfigError("experiment config needs a 'command'")
        return cls(**doc)

    @classmethod
    def from_file(cls, path: Union[str, Path], **overrides: Any) -> "ExperimentConfig":
        """Reads the file, applies non-None overrides and validates."""
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as e:
            raise ExperimentConfigError(f"cannot read experiment config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ExperimentConfigError(f"invalid JSON in {path}: {e.msg}") from e
        config = cls.from_dict(doc)
        for key, value in overrides.items():
            if value is not None:
                setattr(config, key, value)
        config.validate()
        return config

    @property
    def eps_list(self) -> List[float]:
        if self.eps is None:
            return []
        return [float(e) for e in (self.eps if isinstance(self.eps, list) else [self.eps])]

    @property
    def l_list(self) -> List[int]:
        if self.L is None:
            return []
        return [int(v) for v in (self.L if isinstance(self.L, list) else [self.L])]

    @property
    def is_builtin(self) -> bool:
        return self.state is not None and self.state.lower() in BUILTIN_STATES

    def resolved_state_id(self) -> str:
        if self.state_id:
            return self.state_id
        if self.state is None:
            return "random"
        return self.state.lower() if self.is_builtin else Path(self.state).stem

    def validate(self) -> bool:
        errors: List[str] = []

        if self.command not in COMMANDS:
            errors.append(f"unknown command '{self.command}' (known: {COMMANDS})")
        needs_state = not (self.command == "decouple" and self.grid)
        if self.state is None and needs_state:
            errors.append("a 'state' (builtin name or file path) is required")
        elif self.state is not None and not self.is_builtin and not Path(self.state).is_file():
            errors.append(f"unknown state '{self.state}' (builtin: {BUILTIN_STATES}, or an existing file)")
        if self.command in STOCHASTIC_COMMANDS and self.seed is None:
            errors.append(f"command '{self.command}' needs a seed")
        if self.seed is not None and (not isinstance(self.seed, int) or self.seed < 0):
            errors.append("seed must be a non-negative integer")
        if self.samples is not None and self.samples < 2:
            errors.append("samples must be >= 2")
        if self.runs < 1:
            errors.append("runs must be >= 1")
        if self.n_max < 1:
            errors.append("n_max must be >= 1")
        if self.mode not in PLAN_MODES:
            errors.append(f"mode must be one of {PLAN_MODES}")
        if len(self.split) != 3 or len(set(self.split)) != 3:
            errors.append("split must name three distinct labels (A, B, R)")
        try:
            eps_values = self.eps_list
        except (TypeError, ValueError):
            eps_values = []
            errors.append("eps must be a number or a list of numbers")
        if self.command in ("smooth", "convergence", "merge") and not eps_values:
            errors.append(f"command '{self.command}' needs eps")
        # merge planı ε = 0 kabul etmez; smoothing ε = 0'da non-smooth değere iner
        bad_eps = [e for e in eps_values if not 0.0 <= e < 1.0 or (self.command == "merge" and e == 0.0)]
        if bad_eps:
            errors.append(f"eps must lie in [0, 1) (and be > 0 for merge), got {bad_eps}")

        if errors:
            logger.error("❌ Experiment config geçersiz: %s", "; ".join(errors))
            raise ExperimentConfigError("; ".join(errors))
        return True

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
