"""Command-line pipeline: simulate loss data, fit losses, train, evaluate.

Each stage reads a JSON configuration and writes its artifacts into the
configured output directory, so intermediate results stay inspectable and
reusable.  Every artifact gets a ``.meta.json`` sidecar carrying the
configuration hash and the seeds involved; nothing records wall-clock
time, so a rerun from the same configuration is byte-identical.

Exit codes: 0 success, 2 usage, 3 bad input or configuration,
4 dispatch infeasibility, 5 training divergence.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .dispatch import ReserveConfig
from .errors import (
    DivergenceError,
    InfeasibleError,
    ParseError,
    ValidationError,
)
from .forecaster import (
    FeatureConfig,
    build_features,
    load_model,
    predict,
    save_model,
    train_ann,
    train_mlr,
)
from .grid_model import load_network, load_profile_from_csv
from .loss_fit import LossVariant, QuadraticLoss, fit_variant
from .metrics import build_report, fepc_by_day
from .scenario import LossDataset, build_loss_dataset
from .series import load_series_csv, synthetic_series

GRID_POINTS = 400

_SECTION_DEFAULTS = {
    "scenarios": {"count": 500, "seed": 7, "band": 0.1},
    "series": {"synthetic_days": 913, "seed": 11, "start": "2010-01-01"},
    "features": {"lag_hours": 4, "avg_days": 3, "temperature_degree": 3},
    "loss_fit": {"tolerance": None, "delta": None, "lambda": None},
}


class PipelineConfig:
    """Validated view of the pipeline JSON configuration.

    Relative paths are resolved against the configuration file's
    directory.  Referenced input files must exist up front; the output
    directory is created on demand.
    """

    def __init__(self, raw: dict, base_dir: Path):
        if not isinstance(raw, dict):
            raise ParseError("configuration must be a JSON object")
        self.raw = raw
        self.base_dir = base_dir
        paths = raw.get("paths")
        if not isinstance(paths, dict):
            raise ParseError("configuration lacks a 'paths' object")
        for key in ("network", "typical_day", "output_dir"):
            if key not in paths:
                raise ParseError(f"paths.{key} is missing")
        self.network_path = self._resolve(paths["network"], must_exist=True)
        self.typical_day_path = self._resolve(paths["typical_day"],
                                              must_exist=True)
        self.series_path = (self._resolve(paths["series"], must_exist=True)
                            if paths.get("series") else None)
        self.output_dir = self._resolve(paths["output_dir"])

        for name, defaults in _SECTION_DEFAULTS.items():
            section = dict(defaults)
            section.update(raw.get(name) or {})
            setattr(self, name.replace("-", "_"), section)

        reserve = raw.get("reserve")
        self.reserve = ReserveConfig(**reserve) if reserve else None

        split = raw.get("split") or {}
        self.train_start = split.get("train_start")
        self.test_start = split.get("test_start")
        self.test_end = split.get("test_end")
        if any(v is not None for v in (self.train_start, self.test_start,
                                       self.test_end)):
            if None in (self.train_start, self.test_start, self.test_end):
                raise ParseError("split needs train_start, test_start "
                                 "and test_end together")
            stamps = [pd.Timestamp(v) for v in
                      (self.train_start, self.test_start, self.test_end)]
            if not stamps[0] < stamps[1] < stamps[2]:
                raise ParseError("split dates must be strictly ordered")

        self.training = raw.get("training") or {}
        self.config_hash = hashlib.sha256(
            json.dumps(raw, sort_keys=True,
                       separators=(",", ":")).encode()).hexdigest()

    def _resolve(self, value, must_exist=False) -> Path:
        path = Path(value)
        if not path.is_absolute():
            path = self.base_dir / path
        if must_exist and not path.exists():
            raise ParseError(f"configured file does not exist: {path}")
        return path

    def require_split(self):
        if self.train_start is None:
            raise ParseError("this command needs the 'split' section")

    def training_params(self, model_kind: str, loss_kind: str) -> dict:
        """Training settings for one model, specialised per loss kind.

        The steepness of the fitted losses differs by orders of
        magnitude between kinds, so a single step size cannot serve all
        of them; ``by_loss`` entries override the section defaults.
        """
        section = self.training.get(model_kind) or {}
        if not isinstance(section, dict):
            raise ParseError(f"training.{model_kind} must be an object")
        params = {k: v for k, v in section.items() if k != "by_loss"}
        override = (section.get("by_loss") or {}).get(loss_kind) or {}
        if not isinstance(override, dict):
            raise ParseError(
                f"training.{model_kind}.by_loss.{loss_kind} must be an object")
        params.update(override)
        return params


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read configuration {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"configuration {path} is not valid JSON: "
                         f"{exc}") from exc
    return PipelineConfig(raw, path.parent.resolve())


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_sidecar(cfg: PipelineConfig, artifact: Path, command: str,
                   **details) -> None:
    _write_json(artifact.with_suffix(artifact.suffix + ".meta.json"), {
        "artifact": artifact.name,
        "command": command,
        "config_sha256": cfg.config_hash,
        **details,
    })


def _load_series(cfg: PipelineConfig):
    if cfg.series_path is not None:
        return load_series_csv(cfg.series_path)
    s = cfg.series
    return synthetic_series(int(s["synthetic_days"]), seed=int(s["seed"]),
                            start=s["start"])


def _ensure_outdir(cfg: PipelineConfig) -> Path:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    return cfg.output_dir


# -------------------------------------------------------------- stages


def cmd_gen_losses(cfg: PipelineConfig, scenarios=None, seed=None,
                   jobs=1) -> Path:
    network = load_network(cfg.network_path)
    day = load_profile_from_csv(cfg.typical_day_path)
    count = int(scenarios if scenarios is not None
                else cfg.scenarios["count"])
    used_seed = int(seed if seed is not None else cfg.scenarios["seed"])
    band = float(cfg.scenarios["band"])
    dataset = build_loss_dataset(network, day, n_scenarios=count,
                                 seed=used_seed, reserve=cfg.reserve,
                                 band=band, jobs=jobs)
    out = _ensure_outdir(cfg) / "lossdata.csv"
    dataset.save_csv(out)
    _write_sidecar(cfg, out, "gen-losses", seed=used_seed, scenarios=count,
                   band=band, rows=count * 24,
                   shed_rows=int(dataset.shed.sum()))
    print(f"wrote {out} ({count * 24} rows)")
    return out


def cmd_fit_loss(cfg: PipelineConfig, kind: str) -> Path:
    data_path = cfg.output_dir / "lossdata.csv"
    if not data_path.exists():
        raise ParseError(f"loss dataset not found: {data_path}; "
                         "run gen-losses first")
    dataset = LossDataset.load_csv(data_path)
    if kind == "hourly":
        groups = [dataset.hour_points(h) for h in range(1, 25)]
    else:
        groups = [dataset.pooled_points()]
    fit = cfg.loss_fit
    lam = fit.get("lambda")
    variant = fit_variant(groups, kind, tolerance=fit.get("tolerance"),
                          delta=fit.get("delta"),
                          lam=None if lam is None else float(lam))
    out = _ensure_outdir(cfg) / f"loss_{kind}.json"
    variant.save(out)
    grid_path = cfg.output_dir / f"loss_{kind}_grid.csv"
    _write_loss_grid(variant, grid_path)
    _write_sidecar(cfg, out, "fit-loss", kind=kind,
                   source=data_path.name,
                   functions=len(variant.functions))
    _write_sidecar(cfg, grid_path, "fit-loss", kind=kind,
                   grid_points=GRID_POINTS)
    print(f"wrote {out} and {grid_path}")
    return out


def _write_loss_grid(variant: LossVariant, path: Path) -> None:
    frames = []
    labels = ([str(h) for h in range(1, 25)] if variant.kind == "hourly"
              else [variant.kind])
    for label, fn in zip(labels, variant.functions):
        eps = np.linspace(fn.domain[0], fn.domain[1], GRID_POINTS)
        value, gradient = fn.evaluate(eps)
        frames.append(pd.DataFrame({"function": label, "eps": eps,
                                    "value": value, "gradient": gradient}))
    # %.17g keeps every float bit, so readers recover evaluate() exactly
    pd.concat(frames, ignore_index=True).to_csv(
        path, index=False, float_format="%.17g", lineterminator="\n")


def _resolve_loss(cfg: PipelineConfig, spec: str) -> LossVariant:
    if spec == "mse":
        return LossVariant(kind="mse",
                           functions=(QuadraticLoss(domain=(-1.0, 1.0)),))
    path = Path(spec)
    if not path.is_absolute():
        for candidate in (Path.cwd() / path, cfg.output_dir / path):
            if candidate.exists():
                path = candidate
                break
    if not path.exists():
        raise ParseError(f"loss file not found: {spec}")
    return LossVariant.load(path)


def _slope_scale(loss: LossVariant) -> float:
    """Steepest absolute slope over all of a variant's functions.

    Dividing the configured step size by this makes the first descent
    kick roughly a fixed fraction of the load, whatever the fitted cost
    steepness; without it a setting tuned on one dataset detonates on a
    steeper one.
    """
    worst = 1.0
    for fn in loss.functions:
        if isinstance(fn, QuadraticLoss):
            worst = max(worst, 2.0 * max(abs(fn.domain[0]),
                                         abs(fn.domain[1])))
        else:
            worst = max(worst, max(abs(s) for s in fn.slopes))
    return worst


def cmd_train(cfg: PipelineConfig, model_kind: str, loss_spec: str) -> Path:
    cfg.require_split()
    loss = _resolve_loss(cfg, loss_spec)
    series = _load_series(cfg)
    features = cfg.features
    data = build_features(series, FeatureConfig(
        lag_hours=int(features["lag_hours"]),
        avg_days=int(features["avg_days"]),
        temperature_degree=int(features["temperature_degree"])))
    train_data = data.slice_range(cfg.train_start, cfg.test_start)
    params = cfg.training_params(model_kind, loss.kind)
    if model_kind == "mlr":
        initial = None
        if loss.kind != "mse" and params.get("warm_start", True):
            # heavily one-sided losses wreck a from-zero descent before
            # it finds the data's shape; a quick benchmark-loss fit
            # gives the asymmetric run a sane starting point
            bench = LossVariant(
                kind="mse", functions=(QuadraticLoss(domain=(-1.0, 1.0)),))
            initial = train_mlr(train_data, bench,
                                eta0=0.05 / _slope_scale(bench),
                                gamma=0.001, t_max=1500).weights
        model = train_mlr(train_data, loss,
                          eta0=float(params.get("eta0", 0.05))
                          / _slope_scale(loss),
                          gamma=float(params.get("gamma", 0.001)),
                          t_max=int(params.get("t_max", 4000)),
                          initial_weights=initial)
    else:
        ann_params = dict(
            arch=tuple(params.get("arch", (64, 128, 64))),
            alpha=float(params.get("alpha", 1e-3)),
            beta1=float(params.get("beta1", 0.9)),
            beta2=float(params.get("beta2", 0.999)),
            eps_adam=float(params.get("eps_adam", 1e-8)),
            batch_size=int(params.get("batch_size", 64)),
            seed=int(params.get("seed", 0)))
        initial = None
        if loss.kind != "mse" and params.get("warm_start", True):
            bench = LossVariant(
                kind="mse", functions=(QuadraticLoss(domain=(-1.0, 1.0)),))
            initial = train_ann(train_data, bench, max_epochs=15,
                                **ann_params).weights
        model = train_ann(train_data, loss,
                          max_epochs=int(params.get("max_epochs", 100)),
                          initial_weights=initial, **ann_params)
    out = _ensure_outdir(cfg) / f"model_{model_kind}_{loss.kind}.json"
    save_model(model, out)
    log_path = cfg.output_dir / f"trainlog_{model_kind}_{loss.kind}.csv"
    pd.DataFrame(model.training_log,
                 columns=["iteration", "loss", "grad_norm"]).to_csv(
        log_path, index=False, float_format="%.10g", lineterminator="\n")
    _write_sidecar(cfg, out, "train", model=model_kind, loss_kind=loss.kind,
                   seed=int(params.get("seed", 0)),
                   training_rows=len(train_data),
                   iterations=len(model.training_log))
    print(f"wrote {out} and {log_path}")
    return out


def cmd_evaluate(cfg: PipelineConfig, model_paths, jobs=1) -> Path:
    cfg.require_split()
    network = load_network(cfg.network_path)
    series = _load_series(cfg)
    features = cfg.features
    data = build_features(series, FeatureConfig(
        lag_hours=int(features["lag_hours"]),
        avg_days=int(features["avg_days"]),
        temperature_degree=int(features["temperature_degree"])))
    test = data.slice_range(cfg.test_start, cfg.test_end)
    if len(test) % 24 != 0 or test.hours[0] != 1:
        raise ValidationError(
            "test split must cover whole days starting at midnight")
    actual_days = test.Y.reshape(-1, 24)

    out_dir = _ensure_outdir(cfg)
    comparison_rows = []
    tidy_frames = []
    for spec in model_paths:
        path = Path(spec)
        if not path.exists():
            raise ParseError(f"model file not found: {path}")
        model = load_model(path)
        if model.feature_fingerprint != data.fingerprint:
            raise ValidationError(
                f"model {path.name} was trained on fingerprint "
                f"{model.feature_fingerprint}, data has {data.fingerprint}")
        forecast_days = predict(model, test.X).reshape(-1, 24)
        values, shed = fepc_by_day(network, cfg.reserve, forecast_days,
                                   actual_days, jobs=jobs)
        report = build_report(forecast_days, actual_days, values, shed)
        name = path.stem
        report_path = out_dir / f"report_{name}.csv"
        report.save_csv(report_path)
        _write_sidecar(cfg, report_path, "evaluate", model=name,
                       test_days=actual_days.shape[0],
                       excluded_days=report.excluded_days)
        comparison_rows.append({
            "model": name, "mfepc": report.daily_mfepc,
            "mape": report.daily_mape, "ofp": report.daily_ofp,
            "ufp": report.daily_ufp,
            "excluded_days": report.excluded_days,
        })
        frame = report.to_frame()
        frame.insert(0, "model", name)
        tidy_frames.append(frame[frame.hour != "daily"])
        print(f"{name}: mfepc {report.daily_mfepc:.4f}  "
              f"mape {report.daily_mape:.4f}  ofp {report.daily_ofp:.2f}  "
              f"ufp {report.daily_ufp:.2f}")

    comparison = out_dir / "comparison.csv"
    pd.DataFrame(comparison_rows).to_csv(
        comparison, index=False, float_format="%.10g", lineterminator="\n")
    _write_sidecar(cfg, comparison, "evaluate",
                   models=[row["model"] for row in comparison_rows])
    tidy = out_dir / "plot_hourly_metrics.csv"
    pd.concat(tidy_frames, ignore_index=True).to_csv(
        tidy, index=False, float_format="%.10g", lineterminator="\n")
    _write_sidecar(cfg, tidy, "evaluate",
                   models=[row["model"] for row in comparison_rows])
    print(f"wrote {comparison} and {tidy}")
    return comparison


# ------------------------------------------------------------- parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="costcast",
        description="Dispatch-priced loss functions for load forecasting")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True,
                       help="pipeline configuration JSON")
        p.add_argument("--out", help="override paths.output_dir")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker processes for dispatch solves")

    p = sub.add_parser("gen-losses",
                       help="simulate forecast scenarios into lossdata.csv")
    common(p)
    p.add_argument("--scenarios", type=int, help="number of forecast days")
    p.add_argument("--seed", type=int, help="scenario sampling seed")

    p = sub.add_parser("fit-loss",
                       help="distill lossdata.csv into a loss function")
    common(p)
    p.add_argument("--kind", required=True,
                   choices=["hourly", "daily", "linear", "mse"])

    p = sub.add_parser("train", help="train a model against a loss")
    common(p)
    p.add_argument("--model", required=True, choices=["mlr", "ann"])
    p.add_argument("--loss", required=True,
                   help="'mse' or a fitted loss JSON path")

    p = sub.add_parser("evaluate", help="score trained models on the "
                                        "test split")
    common(p)
    p.add_argument("models", nargs="+", help="model JSON files")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "jobs", 1) < 1:
        parser.exit = sys.exit  # keep argparse semantics
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 2
    if args.command == "gen-losses" and args.scenarios is not None \
            and args.scenarios < 1:
        print("error: --scenarios must be >= 1", file=sys.stderr)
        return 2

    try:
        cfg = load_config(args.config)
        if args.out:
            cfg.output_dir = Path(args.out).resolve()
        if args.command == "gen-losses":
            cmd_gen_losses(cfg, scenarios=args.scenarios, seed=args.seed,
                           jobs=args.jobs)
        elif args.command == "fit-loss":
            cmd_fit_loss(cfg, args.kind)
        elif args.command == "train":
            cmd_train(cfg, args.model, args.loss)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, args.models, jobs=args.jobs)
        return 0
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except InfeasibleError as exc:
        print(f"infeasible dispatch: {exc}", file=sys.stderr)
        if exc.detail:
            print(f"detail: {exc.detail}", file=sys.stderr)
        return 4
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        if exc.trace:
            tail = ", ".join(f"{v:.4g}" for v in exc.trace[-5:])
            print(f"last objectives: {tail}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
