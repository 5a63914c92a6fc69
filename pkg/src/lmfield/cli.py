"""Command line entry point ``lmfield``.

Exit codes: 0 success, 2 admissibility refusal, 3 resource or budget
failure, 4 invalid configuration, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from lmfield.condition_h import check_condition_h
from lmfield.covariance import covariance_table
from lmfield.errors import (
    AdmissibilityError,
    ConfigError,
    DivergenceError,
    LmFieldError,
    ParameterError,
    QuadratureBudgetError,
    ResourceError,
)
from lmfield.forms import QuadraticFormSpec, lag_spec
from lmfield.harness import ExperimentConfig, run_experiment
from lmfield.limits import TruncationWarning, clt_variance, sample_double_ito, sigma2_one_direction
from lmfield.models import SpectralModel
from lmfield.rng import RngStream
from lmfield.simulate import simulate_exact, simulate_spectral

EXIT_OK, EXIT_ERROR, EXIT_ADMISSIBILITY, EXIT_RESOURCE, EXIT_CONFIG = 0, 1, 2, 3, 4


def _load_config(args: argparse.Namespace) -> dict[str, Any]:
    data: dict[str, Any] = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    if getattr(args, "model", None):
        try:
            data["model"] = json.loads(args.model)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--model is not valid JSON: {exc}") from exc
    if args.seed is not None:
        data["seed"] = args.seed
    if args.threads is not None:
        data["threads"] = args.threads
    return data


def _model(data: dict[str, Any]) -> SpectralModel:
    if "model" not in data:
        raise ConfigError("a model is required (config key 'model' or --model)")
    try:
        return SpectralModel.from_dict(data["model"])
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc


def _form(data: dict[str, Any], model: SpectralModel) -> QuadraticFormSpec:
    try:
        if data.get("spec") is not None:
            return QuadraticFormSpec.from_dict(data["spec"])
        return lag_spec(data.get("lag", [0] * model.dimension), model.dimension)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)
        print(path)


# ------------------------------------------------------------------ commands
def cmd_simulate(args: argparse.Namespace) -> int:
    data = _load_config(args)
    model = _model(data)
    n = int(data.get("n", args.n or 64))
    margin = int(data.get("margin", 0))
    stream = RngStream(int(data.get("seed", 0)))
    if data.get("sampler", "spectral") == "exact":
        fld = simulate_exact(model, n, margin, stream)
    else:
        fld = simulate_spectral(model, n, margin, int(data.get("oversample", 4)), stream)
    out = _out_dir(args)
    if args.format == "json":
        path = out / "field.json"
        path.write_text(json.dumps({**fld.sidecar(), "values": fld.values.tolist()}, sort_keys=True))
    else:
        path = out / "field.csv"
        fld.to_csv(path)
    print(path)
    return EXIT_OK


def cmd_covariance(args: argparse.Namespace) -> int:
    data = _load_config(args)
    model = _model(data)
    radius = int(data.get("radius", args.radius if args.radius is not None else 8))
    table = covariance_table(model, radius, float(data.get("tol", 1e-8)))
    if args.format == "json":
        text = json.dumps({"model": model.to_dict(), "radius": radius, "values": table.values.tolist()}, sort_keys=True) + "\n"
        _emit(text, _out_dir(args) / "covariance.json" if args.out else None)
    elif args.out:
        path = _out_dir(args) / "covariance.csv"
        table.to_csv(path)
        print(path)
    else:
        lags = table.lags()
        d = model.dimension
        sys.stdout.write(",".join([f"h{k + 1}" for k in range(d)] + ["r"]) + "\n")
        for h, r in zip(lags, table.values.ravel()):
            sys.stdout.write(",".join(str(int(v)) for v in h) + f",{float(r)!r}\n")
    return EXIT_OK


def cmd_check_h(args: argparse.Namespace) -> int:
    data = _load_config(args)
    model = _model(data)
    form = _form(data, model)
    numeric = bool(data.get("numeric", args.numeric))
    opts = {}
    if numeric:
        opts["rng"] = RngStream(int(data.get("seed", 0)))
    verdict = check_condition_h(model, form, numeric=numeric, **opts)
    text = json.dumps({"model": model.to_dict(), "spec": form.to_dict(), **verdict.to_dict()}, sort_keys=True, indent=2) + "\n"
    _emit(text, _out_dir(args) / "verdict.json" if args.out else None)
    return EXIT_OK


def cmd_limit(args: argparse.Namespace) -> int:
    data = _load_config(args)
    model = _model(data)
    form = _form(data, model)
    kind = data.get("kind", "double_ito")
    out = _out_dir(args)
    if kind == "double_ito":
        with warnings.catch_warnings():
            warnings.simplefilter("always", TruncationWarning)
            est = sample_double_ito(
                model,
                form,
                data.get("resolution"),
                data.get("radius"),
                int(data.get("count", 10_000)),
                RngStream(int(data.get("seed", 0))),
                threads=int(data.get("threads", 1)),
            )
        if args.format == "json":
            _emit(est.to_json() + "\n", out / "limit.json")
        else:
            est.to_csv(out / "limit.csv")
            print(out / "limit.csv")
        return EXIT_OK
    if kind == "gaussian":
        value = clt_variance(model, form)
        text = json.dumps({"kind": "gaussian", "variance": value, "model": model.to_dict(), "spec": form.to_dict()}, sort_keys=True, indent=2)
    elif kind == "one_direction":
        lag = tuple(data.get("lag", (1, 0)))
        const = sigma2_one_direction(float(model.alpha), int(model.slope_p), model.l1.value**2, lag)
        text = const.as_estimate().to_json()
    else:
        raise ConfigError(f"unknown limit kind {kind!r}")
    _emit(text + "\n", out / "limit.json")
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    data = _load_config(args)
    if args.out:
        data["outputs"] = args.out
    config = ExperimentConfig.from_dict(data)
    report = run_experiment(config)
    if not config.outputs:
        sys.stdout.write(report.to_json() if args.format == "json" else report.to_csv())
    else:
        print(Path(config.outputs) / "report.json")
    if not report.complete:
        print(report.message, file=sys.stderr)
        return EXIT_RESOURCE
    return EXIT_OK


# -------------------------------------------------------------------- parser
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lmfield", description="Quadratic forms of long-memory Gaussian fields.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", metavar="PATH", help="JSON configuration")
        p.add_argument("--model", metavar="JSON", help="model description, overrides the config")
        p.add_argument("--seed", type=int, metavar="U64")
        p.add_argument("--threads", type=int, metavar="N", help="worker threads (speed only)")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("simulate", help="one field realisation to a file")
    common(p)
    p.add_argument("--n", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("covariance", help="covariance table to CSV")
    common(p)
    p.add_argument("--radius", type=int)
    p.set_defaults(func=cmd_covariance)

    p = sub.add_parser("check-h", help="condition (H) verdict as JSON")
    common(p)
    p.add_argument("--numeric", action="store_true")
    p.set_defaults(func=cmd_check_h)

    p = sub.add_parser("limit", help="limit-law sampling to CSV and JSON")
    common(p)
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("experiment", help="run an experiment config")
    common(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (AdmissibilityError, DivergenceError) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_ADMISSIBILITY
    except (ResourceError, QuadratureBudgetError, MemoryError) as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConfigError, ParameterError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LmFieldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
