"""Command-line interface: ``faircca synth|fit|transform|experiment|hypotest|version``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cca import CanonicalModel, dumps_model, fit_cca
from .errors import ConfigError, DataError, FairCCAError
from .experiment import (
    ExperimentConfig,
    ingest_csv,
    run_experiment,
    run_hypothesis_suite,
    write_dataset,
    write_matrix,
)
from .fair import FairCanonicalModel, fit_frcca
from .synth import SynthConfig, generate_dataset

log = logging.getLogger("faircca")


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def _data_paths(data_dir) -> dict:
    d = Path(data_dir)
    paths = {"x": d / "x.csv", "y": d / "y.csv", "z": d / "z.csv", "labels": d / "labels.csv"}
    for p in paths.values():
        if not p.exists():
            raise DataError(f"missing input file {p}")
    return paths


def load_model(d: dict):
    if d.get("method") == "frcca":
        return FairCanonicalModel.from_dict(d)
    return CanonicalModel.from_dict(d)


def cmd_synth(args) -> None:
    cfg = _load_json(args.config) if args.config else {}
    if args.seed is not None:
        cfg["seed"] = args.seed
    ds = generate_dataset(SynthConfig.from_dict(cfg))
    write_dataset(args.out, ds)
    counts = ds.manifest()["counts"]
    print(f"wrote {ds.X.shape[0]} samples to {args.out} "
          f"(groups {counts['group_1']}/{counts['group_2']}, labels {counts['label_1']}/{counts['label_2']})")


def cmd_fit(args) -> None:
    X, Y, z, _ = ingest_csv(**_data_paths(args.data))
    if args.method == "frcca":
        model = fit_frcca(X, Y, z, args.rank, args.ridge)
    else:
        model = fit_cca(X, Y, args.rank, args.ridge)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    d = model.to_dict()
    d.setdefault("method", "cca")
    (out / "model.json").write_text(dumps_model(d) + "\n")
    print("rho: " + " ".join(f"{r:.4f}" for r in model.rho))


def cmd_transform(args) -> None:
    model = load_model(_load_json(args.model))
    X, Y, _, _ = ingest_csv(**_data_paths(args.data))
    A, B = model.project(X, "x"), model.project(Y, "y")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.format == "json":
        (out / "projections.json").write_text(json.dumps({"x": A.tolist(), "y": B.tolist()}) + "\n")
    else:
        for name, M in (("x_fair.tsv", A), ("y_fair.tsv", B)):
            np.savetxt(out / name, M, fmt="%.17g", delimiter="\t",
                       header="\t".join(f"c{j + 1}" for j in range(M.shape[1])), comments="")


def _experiment_config(args) -> ExperimentConfig:
    d = _load_json(args.config) if args.config else {"synth": {}}
    if args.seed is not None:
        d["tuning_seed"] = args.seed
    if args.rank is not None:
        d["rank"] = args.rank
    if args.ridge is not None:
        d["ridge"] = args.ridge
    return ExperimentConfig.from_dict(d)


def cmd_experiment(args) -> None:
    cfg = _experiment_config(args)
    if args.method:
        cfg.methods = [args.method]
    result = run_experiment(cfg)
    result.write(args.out, args.format)
    failed = sum(r.error is not None for r in result.records)
    print(f"{len(result.records)} runs written to {args.out} ({failed} failed cells)")


def cmd_hypotest(args) -> None:
    base = _experiment_config(args)
    d = base.to_dict()
    proposed = ExperimentConfig.from_dict({**d, "methods": [args.proposed]})
    baseline = ExperimentConfig.from_dict({**d, "methods": [args.baseline]})
    suite = run_hypothesis_suite(proposed, baseline, args.n_seeds)
    suite.write(args.out)
    for metric, row in suite.table.items():
        for modality, cell in row.items():
            print(f"{metric}\t{modality}\t{cell['type']}={cell['stat']:.4g}\tp={cell['p']:.4g}\t{cell['decision']}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="faircca", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic two-view dataset")
    s.add_argument("--config", help="JSON file with SynthConfig fields")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("fit", help="fit CCA or FR-CCA and write model.json")
    s.add_argument("--data", required=True, help="directory with x.csv, y.csv, z.csv, labels.csv")
    s.add_argument("--method", choices=("cca", "frcca"), default="frcca")
    s.add_argument("--rank", type=int, default=2)
    s.add_argument("--ridge", type=float, default=1e-8)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("transform", help="project data through a fitted model")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--format", choices=("json", "tsv"), default="tsv")
    s.set_defaults(func=cmd_transform)

    for name, func, helptext in (("experiment", cmd_experiment, "multi-seed experiment"),
                                 ("hypotest", cmd_hypotest, "paired hypothesis tests")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", help="JSON file with ExperimentConfig fields")
        s.add_argument("--seed", type=int, help="tuning seed")
        s.add_argument("--rank", type=int)
        s.add_argument("--ridge", type=float)
        s.add_argument("--out", required=True)
        s.set_defaults(func=func)
    exp, hyp = sub.choices["experiment"], sub.choices["hypotest"]
    exp.add_argument("--method", choices=("raw", "cca", "frcca"), help="restrict to one method")
    exp.add_argument("--format", choices=("json", "tsv"), default="json")
    hyp.add_argument("--proposed", choices=("raw", "cca", "frcca"), default="frcca")
    hyp.add_argument("--baseline", choices=("raw", "cca", "frcca"), default="cca")
    hyp.add_argument("--n-seeds", type=int, default=50)

    s = sub.add_parser("version", help="print the package version")
    s.set_defaults(func=lambda args: print(__version__))
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except FairCCAError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (TypeError, ValueError) as exc:
        # malformed config values surface here
        print(f"error: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
