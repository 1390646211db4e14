"""Command-line driver.

Subcommands: verify, tradeoff, cachescan, predict, bench, trace,
tensor-gen, tensor-info and config. Tables go to stdout (or --out) as CSV.
Exit codes: 0 success, 1 failed verification or I/O error, 2 usage error.
"""

import argparse
import logging
import logging.handlers
import sys
import traceback
from collections.abc import Sequence
from pathlib import Path
from types import TracebackType
from typing import Any, Optional, TextIO

import numpy as np

from hybridkernels import __version__
from hybridkernels.data.tensor_io import read_header, read_tensor, write_tensor
from hybridkernels.data.trace_io import read_trace, write_trace
from hybridkernels.domain.errors import describe_error, exit_code_for
from hybridkernels.domain.models import CacheConfig
from hybridkernels.domain.ring import Ring, ring_for
from hybridkernels.domain.settings import AppSettings
from hybridkernels.domain.tensors import Tensor
from hybridkernels.engine.instrumented import CostModel, run_instrumented
from hybridkernels.kernels.config import FaultInjection, KernelConfig
from hybridkernels.services.analytics import config_params, predict, tradeoff_table
from hybridkernels.services.bench import benchmark, cache_scan, scan_trace, thread_sweep
from hybridkernels.services.export import CSVExporter
from hybridkernels.services.verify import RESULT_FIELDS, VerificationService, summarize
from hybridkernels.services.workloads import build_workload
from hybridkernels.state.persistence import SettingsStore

logger = logging.getLogger(__name__)

SIZE_FLAGS = ("n", "r", "p", "a", "b", "c", "u", "v", "x", "d", "s1", "s2")


def setup_logging(level: str = "WARNING", log_file: Optional[str] = None) -> None:
    """Configure stderr logging and, optionally, a rotating log file."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    stderr_handler = logging.StreamHandler(sys.stderr)
    stderr_handler.setLevel(level)
    stderr_handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(stderr_handler)
    root.setLevel(level)
    if log_file:
        path = Path(log_file).expanduser()
        path.parent.mkdir(parents=True, exist_ok=True)
        # Rotating file handler: 1MB max, keep 3 backups
        file_handler = logging.handlers.RotatingFileHandler(
            path, maxBytes=1_000_000, backupCount=3, encoding="utf-8"
        )
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(
            logging.Formatter(
                "%(asctime)s %(levelname)s %(name)s: %(message)s", datefmt="%Y-%m-%d %H:%M:%S"
            )
        )
        root.addHandler(file_handler)
        root.setLevel(logging.DEBUG)


def _global_exception_handler(
    exc_type: type[BaseException], exc_value: BaseException, exc_tb: Optional[TracebackType]
) -> None:
    """Log uncaught exceptions and exit with status 1."""
    if issubclass(exc_type, KeyboardInterrupt):
        sys.__excepthook__(exc_type, exc_value, exc_tb)
        return
    tb_text = "".join(traceback.format_exception(exc_type, exc_value, exc_tb))
    logger.critical("Unhandled exception:\n%s", tb_text)
    sys.exit(1)


# --- argument parsing -----------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="settings JSON to load")
    parser.add_argument("--save-config", action="store_true", help="persist effective settings")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--scalar", choices=("int", "f64"))
    parser.add_argument("--base", type=int, help="matrix side handled by one serial leaf")
    parser.add_argument("--block", type=int, help="reducer block size")
    parser.add_argument("--footprint", type=int, help="tensor leaf footprint threshold")
    parser.add_argument("--log-level", choices=("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"))
    parser.add_argument("--log-file")
    parser.add_argument("--out", type=Path, help="output file (default: stdout)")


def _add_sizes(parser: argparse.ArgumentParser) -> None:
    for flag in SIZE_FLAGS:
        parser.add_argument(f"--{flag}", type=int)
    parser.add_argument("--u-axes", help='U axis labels, e.g. "k1,i1"')
    parser.add_argument("--v-axes", help='V axis labels, e.g. "j1,k1"')
    parser.add_argument("--ranks", help='rank vector for tt, e.g. "2,1,3"')
    parser.add_argument("--order", choices=("morton", "row-major"), help="flattening order")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridkernels", description="Fork-join kernels with measured space/span trade-offs"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    verify = commands.add_parser("verify", help="check kernels against reference loops")
    verify.add_argument("kernels", nargs="*", help="kernel suites (default: all)")
    verify.add_argument("--all", action="store_true", help="run every suite")
    verify.add_argument("--quick", action="store_true", help="smaller grid")
    verify.add_argument(
        "--inject-fault", choices=[f.value for f in FaultInjection], default="none"
    )
    _add_sizes(verify)
    _add_common(verify)

    tradeoff = commands.add_parser("tradeoff", help="MM-OPT space/span sweep")
    tradeoff.add_argument("--n", type=int, required=True)
    tradeoff.add_argument("--r", type=_int_list, help="plane counts (default: 1,2,..,n)")
    tradeoff.add_argument("--M", type=int, dest="capacity")
    tradeoff.add_argument("--B", type=int, dest="line_size")
    tradeoff.add_argument("--no-cache", action="store_true", help="skip the Q1 simulation")
    _add_common(tradeoff)

    scan = commands.add_parser("cachescan", help="simulated Q1 for several cache sizes")
    scan.add_argument("kernel", nargs="?", help="kernel to trace (omit with --trace)")
    scan.add_argument("--trace", type=Path, dest="trace_file", help="replay a binary trace file")
    scan.add_argument("--M", type=_int_list, dest="capacities", required=True)
    scan.add_argument("--B", type=int, dest="line_size")
    _add_sizes(scan)
    _add_common(scan)

    pred = commands.add_parser("predict", help="evaluate cost recurrences")
    pred.add_argument("algo")
    pred.add_argument("--M", type=int, dest="capacity")
    pred.add_argument("--B", type=int, dest="line_size")
    _add_sizes(pred)
    _add_common(pred)

    bench = commands.add_parser("bench", help="wall-clock run_parallel sweep")
    bench.add_argument("kernel")
    bench.add_argument(
        "--threads", type=_int_list, help="thread counts (default: powers of two up to run.threads)"
    )
    bench.add_argument("--repeats", type=int, default=3)
    _add_sizes(bench)
    _add_common(bench)

    trace = commands.add_parser("trace", help="write the access trace of one run")
    trace.add_argument("kernel")
    _add_sizes(trace)
    _add_common(trace)

    gen = commands.add_parser("tensor-gen", help="write a random tensor file")
    gen.add_argument("--dims", type=int, required=True, help="tensor order")
    gen.add_argument("--side", type=int, required=True)
    _add_common(gen)

    info = commands.add_parser("tensor-info", help="load a tensor file and summarize it")
    info.add_argument("path", type=Path)
    info.add_argument("--header-only", action="store_true", help="skip loading the payload")
    _add_common(info)

    config = commands.add_parser("config", help="show or reset the stored settings")
    config.add_argument("--reset", action="store_true", help="delete the settings file")
    _add_common(config)
    return parser


# --- settings ---------------------------------------------------------------------------


def load_settings(args: argparse.Namespace) -> AppSettings:
    """Load settings from --config (or defaults) and apply flag overrides.

    Without a config file, bench times float64 runs and tradeoff measures
    spans at scalar leaves (base 1).
    """
    store = SettingsStore(args.config) if args.config else None
    settings = store.load() if store else AppSettings()
    if args.command == "bench" and args.scalar is None and not args.config:
        settings.run.scalar = "f64"
    if args.command == "tradeoff" and args.base is None and not args.config:
        settings.kernels.mm_base = 1
    overrides: dict[tuple[str, str], Any] = {
        ("run", "seed"): args.seed,
        ("run", "scalar"): args.scalar,
        ("kernels", "mm_base"): args.base,
        ("kernels", "block_size"): args.block,
        ("kernels", "tc_base_footprint"): args.footprint,
        ("logging", "level"): args.log_level,
        ("logging", "log_file"): args.log_file,
        ("cache", "capacity"): getattr(args, "capacity", None),
        ("cache", "line_size"): getattr(args, "line_size", None),
    }
    for (section, name), value in overrides.items():
        if value is not None:
            setattr(getattr(settings, section), name, value)
    if args.save_config:
        (store or SettingsStore()).save(settings)
    return settings


def _ring(settings: AppSettings) -> Ring:
    return ring_for(settings.run.scalar, settings.tolerance.rtol, settings.tolerance.atol)


def _sizes(args: argparse.Namespace) -> dict[str, Any]:
    params: dict[str, Any] = {
        flag: getattr(args, flag) for flag in SIZE_FLAGS if getattr(args, flag) is not None
    }
    for key in ("u_axes", "v_axes", "ranks", "order"):
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    return params


def _write(rows: Sequence[dict[str, Any]], out: Optional[Path], fieldnames: Sequence[str]) -> None:
    target: Path | TextIO = out if out is not None else sys.stdout
    CSVExporter().export(rows, target, fieldnames)


# --- commands ---------------------------------------------------------------------------


def cmd_verify(args: argparse.Namespace, settings: AppSettings) -> int:
    fault = FaultInjection(args.inject_fault)
    service = VerificationService(
        _ring(settings),
        KernelConfig.from_settings(settings.kernels, fault),
        CostModel.from_settings(settings.cost),
        seed=settings.run.seed,
    )
    params = _sizes(args)
    if len(args.kernels) == 1 and params and not args.all:
        results = [service.run_cell(args.kernels[0], params)]
    else:
        results = service.run_grid(None if args.all else args.kernels or None, quick=args.quick)
    _write([r.as_row() for r in results], args.out, RESULT_FIELDS)
    passed, failed = summarize(results)
    print(f"{passed} passed, {failed} failed", file=sys.stderr)
    return 0 if failed == 0 else 1


def cmd_tradeoff(args: argparse.Namespace, settings: AppSettings) -> int:
    n = args.n
    plane_counts = args.r or [1 << e for e in range(n.bit_length()) if 1 << e <= n]
    rows = tradeoff_table(
        n,
        plane_counts,
        CacheConfig.from_settings(settings.cache),
        KernelConfig.from_settings(settings.kernels),
        CostModel.from_settings(settings.cost),
        seed=settings.run.seed,
        measure_cache=not args.no_cache,
    )
    table = [row.as_row() for row in rows]
    _write(table, args.out, list(table[0].keys()) if table else [])
    return 0


def cmd_cachescan(args: argparse.Namespace, settings: AppSettings) -> int:
    if args.trace_file is not None:
        rows = scan_trace(
            read_trace(args.trace_file),
            args.capacities,
            settings.cache.line_size,
            source=args.trace_file.name,
            tall_cache=settings.cache.enforce_tall_cache,
        )
    elif args.kernel is None:
        raise ValueError("cachescan needs a kernel name or --trace FILE")
    else:
        rows = cache_scan(
            args.kernel,
            _sizes(args),
            args.capacities,
            settings.cache.line_size,
            _ring(settings),
            KernelConfig.from_settings(settings.kernels),
            CostModel.from_settings(settings.cost),
            seed=settings.run.seed,
            tall_cache=settings.cache.enforce_tall_cache,
        )
    table = [row.as_row() for row in rows]
    _write(table, args.out, list(table[0].keys()) if table else [])
    return 0


def cmd_predict(args: argparse.Namespace, settings: AppSettings) -> int:
    params = {key: value for key, value in _sizes(args).items() if isinstance(value, int)}
    cache = settings.cache
    params.update(M=cache.capacity, B=cache.line_size, alpha=cache.alpha)
    # Scalar leaves unless a threshold is given on the command line
    leaves = config_params(KernelConfig.from_settings(settings.kernels))
    if args.base is not None:
        params["base"] = leaves["base"]
    if args.footprint is not None:
        params["footprint"] = leaves["footprint"]
    row = predict(args.algo, params).as_row()
    _write([row], args.out, list(row.keys()))
    return 0


def cmd_bench(args: argparse.Namespace, settings: AppSettings) -> int:
    rows = benchmark(
        args.kernel,
        _sizes(args),
        args.threads or thread_sweep(settings.run.threads),
        _ring(settings),
        KernelConfig.from_settings(settings.kernels),
        seed=settings.run.seed,
        repeats=args.repeats,
        check_races=settings.run.debug_race_check,
    )
    table = [row.as_row() for row in rows]
    _write(table, args.out, list(table[0].keys()) if table else [])
    return 0


def cmd_trace(args: argparse.Namespace, settings: AppSettings) -> int:
    if args.out is None:
        raise ValueError("trace needs --out FILE")
    rng = np.random.default_rng(settings.run.seed)
    workload = build_workload(
        args.kernel, _sizes(args), _ring(settings), rng, KernelConfig.from_settings(settings.kernels)
    )
    run = run_instrumented(
        workload.tree, CostModel.from_settings(settings.cost), execute=False, record_trace=True
    )
    assert run.trace is not None
    count = write_trace(args.out, run.trace)
    print(f"{count} accesses written to {args.out}", file=sys.stderr)
    return 0


def cmd_tensor_gen(args: argparse.Namespace, settings: AppSettings) -> int:
    if args.out is None:
        raise ValueError("tensor-gen needs --out FILE")
    ring = _ring(settings)
    rng = np.random.default_rng(settings.run.seed)
    tensor = Tensor.from_array(ring.random(rng, (args.side,) * args.dims), ring)
    write_tensor(args.out, tensor)
    return 0


def cmd_tensor_info(args: argparse.Namespace, settings: AppSettings) -> int:
    header = read_header(args.path)
    row: dict[str, Any] = {
        "path": str(args.path),
        "order": header.order,
        "side": header.side,
        "scalar": header.mode.value,
        "elements": header.elements,
        "min": "",
        "max": "",
    }
    if not args.header_only:
        values = read_tensor(args.path).to_numpy()
        row.update(min=values.min().item(), max=values.max().item())
    _write([row], args.out, list(row.keys()))
    return 0


def cmd_config(args: argparse.Namespace, settings: AppSettings) -> int:
    store = SettingsStore(args.config) if args.config else SettingsStore()
    if args.reset:
        if store.delete():
            print(f"Removed {store.path}", file=sys.stderr)
        else:
            print(f"No settings file at {store.path}", file=sys.stderr)
        return 0
    source = store.path if args.config and store.exists() else "built-in defaults"
    print(f"Settings from {source}", file=sys.stderr)
    text = settings.model_dump_json(indent=2)
    if args.out is not None:
        args.out.write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


COMMANDS = {
    "verify": cmd_verify,
    "tradeoff": cmd_tradeoff,
    "cachescan": cmd_cachescan,
    "predict": cmd_predict,
    "bench": cmd_bench,
    "trace": cmd_trace,
    "tensor-gen": cmd_tensor_gen,
    "tensor-info": cmd_tensor_info,
    "config": cmd_config,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = load_settings(args)
        setup_logging(settings.logging.level, settings.logging.log_file)
        return COMMANDS[args.command](args, settings)
    except Exception as e:
        logger.debug("Command %s failed", args.command, exc_info=True)
        print(describe_error(e), file=sys.stderr)
        return exit_code_for(e)


def run() -> None:
    """Console-script entry point."""
    sys.excepthook = _global_exception_handler
    sys.exit(main())
