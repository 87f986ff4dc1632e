"""
main.py - Merging toolkit ana giriş noktası
-------------------------------------------
Config-driven experiment runner.
- JSON experiment file (+ --seed / --out / --samples overrides)
- Router pattern: handlers/ altındaki komut modülleri otomatik yüklenir
- CSV raporlar (pandas) + manifest.json
- Hata durumunda makine-okunur error object (stdout + error.json)

Kullanım:
    python main.py --config experiments/duality_ghz.json --out results/
Exit status: 0 başarı, 2 kullanım hatası (config/parametre), 1 sayısal hata.
"""

import argparse
import asyncio
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd
import psutil

from config import ExperimentConfig, ToolkitConfig, get_config
from utils.handler_loader import CommandDispatcher, CommandResult, ExperimentContext, load_handlers
from utils.qcore.qcore_constants import CSV_FLOAT_FORMAT, ERROR_FILE, MANIFEST_FILE, TOOLKIT_NAME, TOOLKIT_VERSION
from utils.qcore.qcore_exceptions import ExperimentConfigError, InvalidParameterError, QCoreError
from utils.qcore.qcore_metrics import get_metrics
from utils.qcore.qcore_utils import builtin_state, load_state

# ---------------------------------------------------------------------
# Logging Setup
# ---------------------------------------------------------------------
logging.basicConfig(
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    level=logging.INFO,
    datefmt="%Y-%m-%d %H:%M:%S"
)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_USAGE = 2

USAGE_ERRORS = (ExperimentConfigError, InvalidParameterError)


# ---------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------
def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Single-shot state merging toolkit")
    parser.add_argument("--config", required=True, help="JSON experiment file")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="output directory (default: config 'out')")
    parser.add_argument("--samples", type=int, default=None, help="override the config samples")
    return parser.parse_args(argv)


def error_object(exc: BaseException, operation: Optional[str]) -> Dict[str, Any]:
    if isinstance(exc, QCoreError):
        return exc.to_dict(operation)
    return {"error": type(exc).__name__, "operation": operation, "message": str(exc), "invariant": None}


def write_error(out_dir: Path, payload: Dict[str, Any]) -> None:
    """Error object to stdout and <out>/error.json."""
    print(json.dumps(payload))
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / ERROR_FILE).write_text(json.dumps(payload, indent=2))
    except OSError as e:
        logger.error(f"❌ error.json yazılamadı: {e}")


def write_report(out_dir: Path, result: CommandResult) -> Path:
    """CSV in the declared column order, 12 significant digits."""
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / result.filename
    frame = pd.DataFrame(result.rows, columns=result.columns)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    logger.info(f"✅ Rapor yazıldı: {path} ({len(frame)} satır)")
    return path


def write_manifest(out_dir: Path, config: ExperimentConfig, toolkit: ToolkitConfig,
                   wall_time: float, outputs: List[str], notes: Dict[str, Any]) -> Path:
    manifest = {
        "toolkit_name": TOOLKIT_NAME,
        "toolkit_version": TOOLKIT_VERSION,
        "config": config.to_dict(),
        "toolkit": toolkit.to_dict(),
        "wall_time_s": wall_time,
        "peak_rss_bytes": psutil.Process().memory_info().rss,
        "metrics": get_metrics().get_metrics(),
        "outputs": outputs,
        "notes": notes,
    }
    path = out_dir / MANIFEST_FILE
    path.write_text(json.dumps(manifest, indent=2, default=str))
    return path


def resolve_state(config: ExperimentConfig):
    if config.state is None:
        return None
    if config.is_builtin:
        return builtin_state(config.state)
    return load_state(config.state)


# ---------------------------------------------------------------------
# Run
# ---------------------------------------------------------------------
async def run(config: ExperimentConfig, toolkit: Optional[ToolkitConfig] = None) -> int:
    """
    Executes one validated experiment.

    Returns:
        Exit status; reports and manifest (or error.json) are written under config.out
    """
    out_dir = Path(config.out)
    started = time.perf_counter()
    try:
        config.validate()
        toolkit = toolkit or await get_config()
        get_metrics().reset()

        state = resolve_state(config)
        ctx = ExperimentContext(config=config, toolkit=toolkit, state=state,
                                state_id=config.resolved_state_id())

        dispatcher = CommandDispatcher()
        await load_handlers(dispatcher)
        result = await dispatcher.dispatch(config.command, ctx)

        report = write_report(out_dir, result)
        wall_time = time.perf_counter() - started
        write_manifest(out_dir, config, toolkit, wall_time, [report.name], result.notes)
        logger.info(f"✅ {config.command} tamamlandı ({wall_time:.2f} s)")
        return EXIT_OK

    except USAGE_ERRORS as e:
        logger.error(f"❌ Kullanım hatası ({config.command}): {e}")
        write_error(out_dir, error_object(e, config.command))
        return EXIT_USAGE
    except QCoreError as e:
        logger.error(f"❌ {type(e).__name__} in {config.command}: {e}")
        write_error(out_dir, error_object(e, config.command))
        return EXIT_NUMERIC
    except Exception as e:
        logger.exception(f"🚨 Beklenmeyen hata ({config.command}): {e}")
        write_error(out_dir, error_object(e, config.command))
        return EXIT_NUMERIC


# ---------------------------------------------------------------------
# Main Entry Point
# ---------------------------------------------------------------------
async def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    try:
        toolkit = await get_config()
        logging.getLogger().setLevel(toolkit.LOG_LEVEL.upper())
        config = ExperimentConfig.from_file(args.config, seed=args.seed, out=args.out, samples=args.samples)
    except ExperimentConfigError as e:
        logger.error(f"❌ Config yüklenemedi: {e}")
        write_error(Path(args.out or "results"), error_object(e, None))
        return EXIT_USAGE

    logger.info(f"🔄 Command: {config.command} | state: {config.state} | seed: {config.seed}")
    return await run(config, toolkit)


if __name__ == "__main__":
    try:
        sys.exit(asyncio.run(main()))
    except KeyboardInterrupt:
        logger.info("👋 Run interrupted by user")
        sys.exit(130)
