"""Command-line interface.

Subcommands: synth-gen, fit-base, project, sweep, evaluate.  Options may come
from an INI-style config file (one section per command, flat key=value); a
command-line flag with the same name always wins.

Exit codes: 0 success; 1 some sweep grid points failed; 2 bad usage, config,
or input data; 3 a solver run did not converge.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import baseline, data, figures, metrics
from .divergence import EPS_CLIP
from .exceptions import (
    ConvergenceError,
    CsvParseError,
    CsvSchemaError,
    DegenerateMarginalError,
    InfeasibilityError,
    InvalidModelError,
    NumericBlowupError,
)
from .projection import fit_projection, project_scores, save_projected_model
from .solver import SolverConfig


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    low = str(text).lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_auto(cast):
    def parse(text):
        if str(text).lower() == "auto":
            return None
        return cast(text)

    return parse


def _float_list(text: str):
    return [float(t) for t in str(text).split(",") if t.strip() != ""]


_SOLVER_OPTS = [
    ("metric", str, "eo"),
    ("divergence", str, "kl"),
    ("rho", float, 2.0),
    ("zeta", _opt_auto(float), None),
    ("max-iters", _opt_auto(int), None),
    ("residual-tol", float, 1e-6),
    ("workers", int, 1),
    ("chunk-size", int, 16384),
    ("seed", int, 0),
    ("eps-clip", float, EPS_CLIP),
]

_SPECS = {
    "synth-gen": [
        ("out", str, None),
        ("n", int, 1000),
        ("num-features", int, 4),
        ("classes", int, 2),
        ("groups", int, 2),
        ("group-weights", str, ""),
        ("class-bias", str, ""),
        ("separation", float, 1.0),
        ("group-shift", float, 0.3),
        ("biased-preset", _bool, False),
        ("seed", int, 0),
    ],
    "fit-base": [
        ("data", str, None),
        ("out-dir", str, None),
        ("label-col", str, "label"),
        ("group-col", str, "group"),
        ("test-fraction", float, 0.3),
        ("split-seed", int, 0),
        ("l2", float, 1e-4),
        ("lr", float, 0.1),
        ("epochs", int, 500),
        ("group-in-features", _bool, True),
        ("eps-clip", float, EPS_CLIP),
    ],
    "project": [
        ("scores-train", str, None),
        ("scores-test", str, None),
        ("out-dir", str, None),
        ("alpha", float, 0.05),
    ]
    + _SOLVER_OPTS,
    "sweep": [
        ("scores-train", str, None),
        ("scores-test", str, None),
        ("out", str, None),
        ("alpha-grid", _float_list, [0.02, 0.05, 0.1, 0.2]),
        ("fig", str, ""),
        ("fig-x", str, "meo"),
    ]
    + _SOLVER_OPTS,
    "evaluate": [
        ("scores", str, None),
        ("out", str, None),
    ],
}

_REQUIRED = {
    "synth-gen": ("out",),
    "fit-base": ("data", "out-dir"),
    "project": ("scores-train", "scores-test", "out-dir"),
    "sweep": ("scores-train", "scores-test", "out"),
    "evaluate": ("scores", "out"),
}


def _merge_options(command: str, args: argparse.Namespace) -> dict:
    """flag > config > default, with unknown config keys rejected."""
    table = {name: (cast, default) for name, cast, default in _SPECS[command]}
    merged = {}
    from_config = {}
    if args.config:
        parser = configparser.ConfigParser()
        read = parser.read(args.config)
        if not read:
            raise ConfigError(f"config file not found: {args.config}")
        if parser.has_section(command):
            for key, raw in parser.items(command):
                if key not in table:
                    raise ConfigError(f"unknown config key {key!r} in section [{command}]")
                cast, _ = table[key]
                try:
                    from_config[key] = cast(raw)
                except ValueError as exc:
                    raise ConfigError(f"bad value for config key {key!r}: {exc}") from None
    for name, (cast, default) in table.items():
        flag_val = getattr(args, name.replace("-", "_"))
        if flag_val is not None:
            merged[name] = flag_val
        elif name in from_config:
            merged[name] = from_config[name]
        else:
            merged[name] = default
    for name in _REQUIRED[command]:
        if merged[name] in (None, ""):
            raise ConfigError(f"missing required option --{name}")
    return merged


def _solver_config(opt: dict) -> SolverConfig:
    return SolverConfig(
        rho=opt["rho"],
        zeta=opt["zeta"],
        max_iters=opt["max-iters"],
        residual_tol=opt["residual-tol"],
        worker_count=opt["workers"],
        seed=opt["seed"],
        chunk_size=opt["chunk-size"],
    )


def _parse_bias(text: str, num_groups: int, num_classes: int) -> np.ndarray:
    rows = [r for r in text.split(";") if r.strip() != ""]
    if len(rows) != num_groups:
        raise ConfigError(f"class-bias needs {num_groups} ';'-separated rows")
    mat = np.array([[float(t) for t in r.split(",")] for r in rows])
    if mat.shape != (num_groups, num_classes):
        raise ConfigError(f"class-bias rows need {num_classes} entries")
    return mat


def _report_entry(scores: np.ndarray, labels: np.ndarray, groups: np.ndarray) -> dict:
    rep = metrics.evaluate(metrics.decide(scores), labels, groups, num_classes=scores.shape[1])
    return {
        "accuracy": rep.accuracy,
        "meo": rep.meo,
        "statistical_parity": rep.statistical_parity,
    }


def _write_json(payload: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_synth_gen(opt: dict) -> int:
    if opt["biased-preset"]:
        spec = data.biased_preset(opt["n"], opt["classes"], opt["groups"], seed=opt["seed"])
        spec.num_features = opt["num-features"]
    else:
        weights = None
        if opt["group-weights"]:
            weights = tuple(_float_list(opt["group-weights"]))
        bias = None
        if opt["class-bias"]:
            bias = _parse_bias(opt["class-bias"], opt["groups"], opt["classes"])
        spec = data.SynthSpec(
            n=opt["n"],
            num_features=opt["num-features"],
            num_classes=opt["classes"],
            num_groups=opt["groups"],
            group_weights=weights,
            class_bias=bias,
            cluster_separation=opt["separation"],
            group_shift=opt["group-shift"],
            seed=opt["seed"],
        )
    ds = data.generate_synth(spec)
    data.write_dataset_csv(ds, opt["out"])
    return 0


def cmd_fit_base(opt: dict) -> int:
    ds = data.load_csv(opt["data"], label_col=opt["label-col"], group_col=opt["group-col"])
    if ds.features is None:
        raise CsvSchemaError("fit-base needs feature columns, found scores")
    train, test = data.split(ds, opt["test-fraction"], seed=opt["split-seed"])
    num_c = int(ds.labels.max()) + 1
    num_a = int(ds.groups.max()) + 1

    def model_features(part: data.TabularDataset) -> np.ndarray:
        if not opt["group-in-features"]:
            return part.features
        onehot = np.zeros((part.n, num_a))
        onehot[np.arange(part.n), part.groups] = 1.0
        return np.hstack([part.features, onehot])

    base = baseline.fit_logreg(
        model_features(train), train.labels, num_classes=num_c,
        l2=opt["l2"], lr=opt["lr"], epochs=opt["epochs"],
    )
    group_pred = baseline.fit_group_model(
        train.features, train.labels, train.groups,
        num_classes=num_c, num_groups=num_a,
        l2=opt["l2"], lr=opt["lr"], epochs=opt["epochs"],
    )
    out = Path(opt["out-dir"])
    out.mkdir(parents=True, exist_ok=True)
    baseline.save_model(base, str(out / "base_model.txt"))
    baseline.save_model(group_pred.model, str(out / "group_model.txt"))
    for name, part in (("scores_train.csv", train), ("scores_test.csv", test)):
        probs = baseline.predict_proba(base, model_features(part))
        data.write_scores_csv(str(out / name), probs, part.labels, part.groups)
    return 0


def _load_scores(path: str):
    ds = data.load_csv(path)
    if ds.scores is None:
        raise CsvSchemaError(f"{path}: expected score_* columns")
    return ds


def cmd_project(opt: dict) -> int:
    train = _load_scores(opt["scores-train"])
    test = _load_scores(opt["scores-test"])
    cfg = _solver_config(opt)
    model, sol = fit_projection(
        train.scores, train.labels, train.groups,
        metric=opt["metric"], alpha=opt["alpha"], divergence=opt["divergence"],
        cfg=cfg, eps_clip=opt["eps-clip"],
    )
    proj_train = project_scores(model, train.scores, train.groups)
    proj_test = project_scores(model, test.scores, test.groups)

    out = Path(opt["out-dir"])
    out.mkdir(parents=True, exist_ok=True)
    save_projected_model(model, sol, str(out / "projected_model.json"))
    data.write_scores_csv(str(out / "scores_projected_train.csv"), proj_train, train.labels, train.groups)
    data.write_scores_csv(str(out / "scores_projected_test.csv"), proj_test, test.labels, test.groups)

    test_entry = _report_entry(proj_test, test.labels, test.groups)
    report = {
        "alpha": opt["alpha"],
        "divergence": opt["divergence"],
        "metric": opt["metric"],
        "iterations": sol.iterations,
        **test_entry,
        "train": _report_entry(proj_train, train.labels, train.groups),
        "base_test": _report_entry(test.scores, test.labels, test.groups),
        "base_train": _report_entry(train.scores, train.labels, train.groups),
        "lambda_l1": float(np.sum(np.abs(model.lam))),
        "final_residual": sol.primal_residuals[-1],
    }
    _write_json(report, str(out / "report.json"))
    return 0


def cmd_sweep(opt: dict) -> int:
    grid = opt["alpha-grid"]
    if not grid or any(a <= 0.0 for a in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("alpha-grid must be strictly increasing and positive")
    train = _load_scores(opt["scores-train"])
    test = _load_scores(opt["scores-test"])
    cfg = _solver_config(opt)
    rows = []
    failures = 0
    for alpha in grid:
        started = time.perf_counter()
        try:
            model, _ = fit_projection(
                train.scores, train.labels, train.groups,
                metric=opt["metric"], alpha=alpha, divergence=opt["divergence"],
                cfg=cfg, eps_clip=opt["eps-clip"],
            )
            proj_test = project_scores(model, test.scores, test.groups)
            entry = _report_entry(proj_test, test.labels, test.groups)
        except (ConvergenceError, NumericBlowupError, InfeasibilityError) as exc:
            print(f"sweep: alpha={alpha:g} failed: {exc}", file=sys.stderr)
            failures += 1
            rows.append({"alpha": alpha, "accuracy": None, "meo": None,
                         "statistical_parity": None, "runtime_s": None})
            continue
        entry.update({"alpha": alpha, "runtime_s": time.perf_counter() - started})
        rows.append(entry)

    def fmt(value):
        return "" if value is None else f"{value:.9g}"

    with open(opt["out"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("alpha,accuracy,meo,statistical_parity,runtime_s\n")
        for row in rows:
            fh.write(
                ",".join(fmt(row[k]) for k in ("alpha", "accuracy", "meo", "statistical_parity", "runtime_s"))
                + "\n"
            )
    if opt["fig"]:
        figures.render_tradeoff(rows, opt["fig"], x_metric=opt["fig-x"])
    if failures:
        print(f"sweep: {failures} of {len(rows)} grid points failed", file=sys.stderr)
        return 1
    return 0


def cmd_evaluate(opt: dict) -> int:
    ds = _load_scores(opt["scores"])
    entry = _report_entry(ds.scores, ds.labels, ds.groups)
    entry.update(
        {
            "n": int(ds.n),
            "num_classes": int(ds.scores.shape[1]),
            "num_groups": int(ds.groups.max()) + 1,
        }
    )
    _write_json(entry, opt["out"])
    return 0


_HANDLERS = {
    "synth-gen": cmd_synth_gen,
    "fit-base": cmd_fit_base,
    "project": cmd_project,
    "sweep": cmd_sweep,
    "evaluate": cmd_evaluate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairproj",
        description="Project a trained classifier's scores onto group-fairness constraints.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, table in _SPECS.items():
        cmd = sub.add_parser(command)
        cmd.add_argument("--config", default=None, help="INI config; section [%s]" % command)
        for name, cast, _default in table:
            if cast is _bool:
                cmd.add_argument(f"--{name}", default=None, type=_bool, metavar="BOOL")
            else:
                cmd.add_argument(f"--{name}", default=None, type=cast)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opt = _merge_options(args.command, args)
        return _HANDLERS[args.command](opt)
    except (ConvergenceError, NumericBlowupError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (
        ConfigError,
        CsvParseError,
        CsvSchemaError,
        InvalidModelError,
        DegenerateMarginalError,
        InfeasibilityError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
