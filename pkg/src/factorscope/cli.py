"""Command-line front end: ``factorscope {estimate,simulate,forecast,replay}``.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .covariance import estimate_covariance, infer_grouping
from .eigen import fit
from .errors import InputError, NumericError
from .forecasting import RollingConfig, rolling_forecast
from .panel import FLOAT_FORMAT, difference, load_csv
from .simulation import Example1Config, Example2Config, run_replications
from .twostep import two_step_fit

log = logging.getLogger("factorscope")

DEFAULT_SEED = 20100607
EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
THREADS_ENV = "FACTORSCOPE_THREADS"


class UsageError(InputError):
    pass


def _write_json(path: Path, obj, indent=None):
    path.write_text(json.dumps(obj, indent=indent, sort_keys=True) + "\n", encoding="utf-8")


def _write_manifest(out: Path, command: str, config: dict):
    manifest = {"command": command, "version": __version__, "config": config}
    _write_json(out / "manifest.json", manifest, indent=2)


def _threads(args) -> int:
    if args.threads is not None:
        t = args.threads
    else:
        env = os.environ.get(THREADS_ENV)
        try:
            t = int(env) if env else 1
        except ValueError:
            raise UsageError(f"{THREADS_ENV}={env!r} is not an integer") from None
    if t < 1:
        raise UsageError(f"threads must be >= 1, got {t}")
    return t


def _load_groups(source, fitted):
    if source is None:
        return None
    try:
        k = int(source)
    except ValueError:
        k = None
    if k is not None:
        return infer_grouping(fitted, k)
    try:
        payload = json.loads(Path(source).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read groups file {source}: {exc}") from None
    groups = payload["groups"] if isinstance(payload, dict) else payload
    return [list(map(int, g)) for g in groups]


def cmd_estimate(cfg: dict, out: Path) -> None:
    if cfg["k0"] is None or cfg["k0"] < 1:
        raise UsageError("--k0 is required and must be >= 1")
    panel = load_csv(cfg["input"], has_header=False if cfg["no_header"] else None)
    if cfg["method"] == "two_step":
        if not cfg["r1"] or not cfg["r2"] or cfg["r1"] < 1 or cfg["r2"] < 1:
            raise UsageError("two_step needs --r1 >= 1 and --r2 >= 1")
        fitted = two_step_fit(panel, cfg["r1"], cfg["r2"], cfg["k0"])
    else:
        if cfg["r"] is None or cfg["r"] < 1:
            raise UsageError("--r is required and must be >= 1")
        fitted = fit(panel, cfg["r"], cfg["k0"])

    groups = _load_groups(cfg["groups"], fitted)
    est = estimate_covariance(fitted, panel, groups)

    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "fit.json", fitted.to_dict())
    _write_json(out / "covariance.json", est.to_dict())
    lines = ["index,eigenvalue"] + [
        f"{i},{FLOAT_FORMAT % v}" for i, v in enumerate(fitted.eigenvalues)
    ]
    (out / "eigenvalues.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"fitted r={fitted.r} k0={fitted.k0} on n={panel.n} p={panel.p}; wrote {out}")


def _design(cfg: dict):
    if cfg["n"] is None or cfg["p"] is None:
        raise UsageError("--n and --p are required")
    if cfg["design"] == "example1":
        return Example1Config(n=cfg["n"], p=cfg["p"], k0=cfg["k0"] or 1)
    return Example2Config(
        n=cfg["n"],
        p=cfg["p"],
        delta1=cfg["delta1"],
        delta2=cfg["delta2"],
        noise=cfg["noise"],
        k0=cfg["k0"] or 3,
        groups=cfg["groups"] or "design",
    )


def _methods(text: str):
    if text in ("both", "all"):
        return ("one_step", "two_step")
    return tuple(s.strip() for s in text.split(",") if s.strip())


def cmd_simulate(cfg: dict, out: Path) -> None:
    design = _design(cfg)
    report = run_replications(
        design, cfg["reps"], _methods(cfg["method"]), base_seed=cfg["seed"], threads=cfg["threads"]
    )
    out.mkdir(parents=True, exist_ok=True)
    (out / "replications.csv").write_text(report.to_csv(), encoding="utf-8")
    (out / "summary.json").write_text(report.to_json(), encoding="utf-8")
    sys.stdout.write(report.format_table())


def cmd_forecast(cfg: dict, out: Path) -> None:
    if cfg["k0"] is None:
        raise UsageError("--k0 is required")
    panel = load_csv(cfg["input"], has_header=False if cfg["no_header"] else None)
    if cfg["difference"]:
        panel = difference(panel)
    r = None if cfg["r"] in (None, "auto") else int(cfg["r"])
    rc = RollingConfig(
        window_length=cfg["window"], r=r, k0=cfg["k0"], ar_max_order=cfg["ar_max_order"]
    )
    report = rolling_forecast(panel, rc, threads=cfg["threads"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "forecast.csv").write_text(report.to_csv(), encoding="utf-8")
    (out / "summary.json").write_text(report.to_json(), encoding="utf-8")
    totals = report.totals()
    print(
        f"{report.n_windows} windows ({len(report.failures)} failed); cumulative RMSE "
        + ", ".join(f"{k}={v:.6g}" for k, v in totals.items())
    )


COMMANDS = {"estimate": cmd_estimate, "simulate": cmd_simulate, "forecast": cmd_forecast}


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="factorscope", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--output-dir", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)

    est = sub.add_parser("estimate", help="fit a factor model to a CSV panel")
    common(est)
    est.add_argument("--input", required=True)
    est.add_argument("--no-header", action="store_true")
    est.add_argument("--r", type=_positive_int)
    est.add_argument("--r1", type=_positive_int)
    est.add_argument("--r2", type=_positive_int)
    est.add_argument("--k0", type=_positive_int, required=True)
    est.add_argument("--method", choices=["one_step", "two_step"], default="one_step")
    est.add_argument("--groups", help="group count, or a JSON file with {groups: [[...]]}")

    sim = sub.add_parser("simulate", help="run a Monte Carlo design")
    common(sim)
    sim.add_argument("--design", choices=["example1", "example2"], required=True)
    sim.add_argument("--n", type=int)
    sim.add_argument("--p", type=int)
    sim.add_argument("--reps", type=_positive_int, default=50)
    sim.add_argument("--k0", type=_positive_int)
    sim.add_argument("--delta1", type=float, default=0.0)
    sim.add_argument("--delta2", type=float, default=0.0)
    sim.add_argument("--noise", choices=["normal", "t5"], default="normal")
    sim.add_argument("--method", default="one_step", help="one_step, two_step or both")
    sim.add_argument("--groups", choices=["design", "single", "infer"])

    fc = sub.add_parser("forecast", help="rolling-window one-step forecasts")
    common(fc)
    fc.add_argument("--input", required=True)
    fc.add_argument("--no-header", action="store_true")
    fc.add_argument("--window", type=_positive_int, default=100)
    fc.add_argument("--r", default="1", help="factor count or 'auto'")
    fc.add_argument("--k0", type=_positive_int, required=True)
    fc.add_argument("--ar-max-order", type=_positive_int, default=5)
    fc.add_argument("--difference", action="store_true")

    rp = sub.add_parser("replay", help="rerun a command from its manifest.json")
    rp.add_argument("--manifest", required=True)
    rp.add_argument("--output-dir", required=True)
    return parser


def _resolve(args) -> tuple:
    """Turn parsed arguments into ``(command, config)`` with every default filled in."""
    if args.command == "replay":
        try:
            manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read manifest {args.manifest}: {exc}") from None
        if manifest.get("command") not in COMMANDS:
            raise UsageError(f"manifest names unknown command {manifest.get('command')!r}")
        return manifest["command"], dict(manifest["config"])

    cfg = {k: v for k, v in vars(args).items() if k not in ("command", "output_dir", "verbose")}
    if cfg["seed"] is None:
        cfg["seed"] = DEFAULT_SEED
        log.info("no --seed given; using default seed %d", DEFAULT_SEED)
    cfg["threads"] = _threads(args)
    if "input" in cfg:
        cfg["input"] = str(Path(cfg["input"]).resolve())
    if args.command == "forecast" and cfg["r"] not in ("auto",):
        try:
            if int(cfg["r"]) < 1:
                raise ValueError
        except ValueError:
            raise UsageError(f"--r must be a positive integer or 'auto', got {cfg['r']!r}") from None
    return args.command, cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(levelname)s: %(message)s",
    )
    try:
        command, cfg = _resolve(args)
        out = Path(args.output_dir)
        COMMANDS[command](cfg, out)
        _write_manifest(out, command, cfg)
    except (InputError, OSError, KeyError) as exc:
        print(f"factorscope: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericError as exc:
        print(f"factorscope: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
