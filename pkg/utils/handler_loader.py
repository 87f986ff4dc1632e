# utils/handler_loader.py
"""
Command routing for the experiment runner.

Her handler modülü bir `router` (CommandRouter) export eder; load_handlers() handlers/
paketindeki tüm modülleri tarar ve router'ları dispatcher'a ekler.
"""

import asyncio
import importlib
import logging
import pkgutil
from dataclasses import dataclass, field
from typing import Any, Awaitable, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar, Union

from utils.qcore.qcore_exceptions import ExperimentConfigError, InvalidParameterError
from utils.qcore.qcore_types import DensityOperator, PureState

logger = logging.getLogger(__name__)


@dataclass
class ExperimentContext:
    """Everything a command handler needs; built once per run by main.run()."""
    config: Any                                   # config.ExperimentConfig
    toolkit: Any                                  # config.ToolkitConfig
    state: Optional[Union[PureState, DensityOperator]] = None
    state_id: str = ""

    @property
    def split(self) -> Tuple[str, str, str]:
        return tuple(self.config.split)

    def pure_state(self) -> PureState:
        """The loaded state as a tripartite pure state over the split labels."""
        if not isinstance(self.state, PureState):
            raise InvalidParameterError(f"command '{self.config.command}' needs a pure state over {list(self.split)}")
        self.state.layout.check_labels(list(self.split))
        return self.state

    @property
    def samples(self) -> int:
        if self.config.samples is not None:
            return int(self.config.samples)
        return int(self.toolkit.PROTOCOL.DEFAULT_SAMPLES)


@dataclass
class CommandResult:
    """Rows for one CSV file; columns fix the output order."""
    filename: str
    columns: List[str]
    rows: List[Dict[str, Any]] = field(default_factory=list)
    notes: Dict[str, Any] = field(default_factory=dict)


Handler = Callable[[ExperimentContext], Awaitable[CommandResult]]


class CommandRouter:
    """Groups the command handlers of one module."""

    def __init__(self, name: str):
        self.name = name
        self.commands: Dict[str, Handler] = {}

    def command(self, name: str) -> Callable[[Handler], Handler]:
        def decorator(func: Handler) -> Handler:
            if name in self.commands:
                raise ExperimentConfigError(f"command '{name}' registered twice in router '{self.name}'")
            self.commands[name] = func
            return func
        return decorator


class CommandDispatcher:
    """Maps command names to handlers collected from routers."""

    def __init__(self):
        self.handlers: Dict[str, Handler] = {}
        self.routers: List[str] = []

    def include_router(self, router: CommandRouter) -> None:
        for name, handler in router.commands.items():
            if name in self.handlers:
                raise ExperimentConfigError(f"command '{name}' already registered")
            self.handlers[name] = handler
        self.routers.append(router.name)

    @property
    def commands(self) -> List[str]:
        return sorted(self.handlers)

    async def dispatch(self, command: str, ctx: ExperimentContext) -> CommandResult:
        handler = self.handlers.get(command)
        if handler is None:
            raise ExperimentConfigError(f"unknown command '{command}' (known: {self.commands})")
        logger.info(f"🔄 Running command: {command}")
        return await handler(ctx)


async def load_handlers(dispatcher: CommandDispatcher, package: str = "handlers") -> dict:
    """handlers paketindeki tüm modülleri yükler ve router'larını dispatcher'a ekler."""
    results = {"loaded": 0, "failed": 0}
    pkg = importlib.import_module(package)

    for module_info in pkgutil.iter_modules(pkg.__path__):
        module_name = module_info.name
        try:
            module = importlib.import_module(f"{package}.{module_name}")
        except ImportError as e:
            results["failed"] += 1
            logger.error(f"❌ Handler yüklenirken hata: {module_name} - {e}")
            continue

        router = getattr(module, "router", None)
        if isinstance(router, CommandRouter):
            dispatcher.include_router(router)
            results["loaded"] += 1
            logger.debug(f"✅ Handler yüklendi: {module_name}")
        else:
            results["failed"] += 1
            logger.warning(f"⚠️ Router bulunamadı: {module_name}")

    logger.info(f"📊 Handler yükleme sonucu: {results['loaded']} başarılı, {results['failed']} başarısız")
    return results


T = TypeVar("T")


async def run_parallel(jobs: Sequence[Callable[[], T]], max_workers: int = 4) -> List[T]:
    """
    Runs blocking jobs in worker threads, at most `max_workers` at a time.

    Sonuçlar job sırasıyla döner; ilk hata yükseltilir.
    """
    semaphore = asyncio.Semaphore(max(1, int(max_workers)))

    async def _run(job: Callable[[], T]) -> T:
        async with semaphore:
            return await asyncio.to_thread(job)

    return list(await asyncio.gather(*(_run(job) for job in jobs)))
