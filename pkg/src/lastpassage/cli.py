"""Command-line interface: ``lastpassage {sample, verify, suite}``.

Exit codes: 0 PASS, 1 FAIL, 2 usage or configuration error, 3 INCONCLUSIVE.
Every command stages its files in a temporary directory next to ``--out`` and
moves them into place only once all of them have been written.
"""
from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
from pathlib import Path
from typing import Callable, List, Optional

from .errors import ConfigurationError, DomainError, UsageError
from .reports import Verdict
from .sampler import METHODS, SamplerConfig, path_iter, write_path_csv
from .suite import CHECK_ORDER, RunConfig, check_stream, run_check, run_suite

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_INCONCLUSIVE = 0, 1, 2, 3
_EXIT = {Verdict.PASS: EXIT_PASS, Verdict.FAIL: EXIT_FAIL, Verdict.INCONCLUSIVE: EXIT_INCONCLUSIVE}

# config-file keys and the RunConfig fields they set
_FILE_KEYS = {"lambda": "lam", "z": "z", "seed": "seed", "paths": "n_paths", "n_paths": "n_paths",
              "dt": "dt", "out": "out_dir", "out_dir": "out_dir", "suite": "suite", "method": "method"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--lambda", dest="lam", type=float, help="drift lambda > 0 (default 1)")
    common.add_argument("--z", type=float, help="level z > 0 (default 1)")
    common.add_argument("--seed", type=int, help="base seed (default 42)")
    common.add_argument("--paths", dest="n_paths", type=int, help="number of paths (default 100000)")
    common.add_argument("--dt", type=float, help="grid step of the approximate samplers (default 1e-4)")
    common.add_argument("--out", dest="out_dir", help="output directory (default ./out)")
    common.add_argument("--config", help="JSON file with any of the above; flags override it")

    # argparse exits with status 2 on bad usage, which is already the usage code
    parser = argparse.ArgumentParser(prog="lastpassage", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sample = sub.add_parser("sample", parents=[common], help="write sampled paths as CSV + JSON sidecars")
    sample.add_argument("--method", help=f"one of {', '.join(METHODS)} (default exact)")
    verify = sub.add_parser("verify", parents=[common], help="run one named check")
    verify.add_argument("--check", required=True, help=f"one of {', '.join(CHECK_ORDER)}")
    suite = sub.add_parser("suite", parents=[common], help="run every check in a fixed order")
    suite.add_argument("--check", action="append", dest="suite",
                       help="restrict the suite to this check (repeatable)")
    suite.add_argument("--quiet", action="store_true", help="no progress lines on stderr")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """Merge the optional JSON file with the flags (flags win) and validate."""
    values = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigurationError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError("config file must hold a JSON object")
        unknown = sorted(set(data) - set(_FILE_KEYS))
        if unknown:
            raise ConfigurationError(f"unknown config keys {unknown}")
        values.update({_FILE_KEYS[k]: v for k, v in data.items()})
    for key in ("lam", "z", "seed", "n_paths", "dt", "out_dir", "method", "suite"):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return RunConfig(**values)


def _publish(staging: Path, out_dir: Path) -> None:
    """Move staged files into ``out_dir``; the directory itself is renamed when new."""
    if not out_dir.exists():
        os.replace(staging, out_dir)
        return
    for item in sorted(staging.iterdir()):
        os.replace(item, out_dir / item.name)
    staging.rmdir()


def _staged(out_dir: str, write: Callable[[Path], int]) -> int:
    out = Path(out_dir)
    if out.exists() and not out.is_dir():
        raise ConfigurationError(f"--out {out} exists and is not a directory")
    parent = out.absolute().parent
    try:
        parent.mkdir(parents=True, exist_ok=True)
        staging = Path(tempfile.mkdtemp(prefix=f".{out.name}-", dir=parent))
    except OSError as exc:
        raise ConfigurationError(f"cannot write to {out}: {exc}") from exc
    try:
        code = write(staging)
        _publish(staging, out)
        return code
    except OSError as exc:
        raise ConfigurationError(f"cannot write to {out}: {exc}") from exc
    finally:
        if staging.exists():
            shutil.rmtree(staging, ignore_errors=True)


def cmd_sample(cfg: RunConfig) -> int:
    if cfg.method not in METHODS:
        raise ConfigurationError(f"unknown method {cfg.method!r}; choose from {', '.join(METHODS)}")
    params = cfg.params
    stream = check_stream(cfg.seed, f"sample:{cfg.method}")
    sampler_config = SamplerConfig(dt=cfg.dt)
    width = max(6, len(str(cfg.n_paths - 1)))

    def write(staging: Path) -> int:
        for i, path in enumerate(path_iter(params, stream, sampler_config, cfg.n_paths, cfg.method)):
            write_path_csv(path, staging / f"path_{i:0{width}d}.csv", params)
        return EXIT_PASS

    return _staged(cfg.out_dir, write)


def cmd_verify(cfg: RunConfig, check: str) -> int:
    if check not in CHECK_ORDER:
        raise UsageError(f"unknown check {check!r}; valid checks: {', '.join(CHECK_ORDER)}")
    report = run_check(cfg, check)
    print(f"{check}: {report.verdict.value} (statistic={report.statistic!r})")

    def write(staging: Path) -> int:
        (staging / f"{check}.json").write_text(report.to_json() + "\n")
        return _EXIT[Verdict(report.verdict)]

    return _staged(cfg.out_dir, write)


def cmd_suite(cfg: RunConfig, quiet: bool = False) -> int:
    def progress(name, report, seconds):
        if not quiet:
            print(f"[{seconds:7.1f}s] {name}: {report.verdict.value}", file=sys.stderr, flush=True)

    result = run_suite(cfg, progress)
    print(f"suite: {result.verdict.value}")

    def write(staging: Path) -> int:
        (staging / "suite.json").write_text(json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n")
        for report in result.reports:
            (staging / f"{report.name}.json").write_text(report.to_json() + "\n")
        return _EXIT[Verdict(result.verdict)]

    return _staged(cfg.out_dir, write)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "sample":
            return cmd_sample(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.check)
        return cmd_suite(cfg, quiet=args.quiet)
    except (ConfigurationError, UsageError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
