"""Command-line front end: ``pglcr simulate | fit | report``.

Exit codes: 0 success, 2 configuration error, 3 input/ingestion error,
4 numerical failure.  ``PGLCR_THREADS`` sets how many chains of a
``--g-grid`` run execute at once (default 1).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    ConfigError,
    DegenerateWeightsError,
    DimensionError,
    IngestionError,
    InsufficientSamplesError,
    NumericalSingularityError,
    TraceVersionError,
)
from .io import RunSettings, apply_setting, load_inputs, read_config, write_covariates, write_responses, write_schema
from .lca import LcaChainConfig, run_lca_chain
from .lcr import LcrChainConfig, run_lcr_chain
from .postprocess import (
    adjusted_rand_index,
    align_to_reference,
    class_proportions,
    coefficient_summary,
    hdi,
    minvi_point_estimate,
    posterior_inclusion_probabilities,
    posthoc_theta,
    stephens_relabel,
    variation_of_information,
)
from .simulate import SPECS, GenerativeSpec, generate
from .trace import read_trace, write_trace

log = logging.getLogger("pglcr")

EXIT_OK, EXIT_CONFIG, EXIT_INGEST, EXIT_NUMERIC = 0, 2, 3, 4
THREADS_ENV = "PGLCR_THREADS"


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------


def _load_spec(name: str, n_obs: int) -> GenerativeSpec:
    if name in SPECS:
        return SPECS[name](n_obs)
    path = Path(name)
    if not path.is_file():
        raise ConfigError(f"unknown spec {name!r}; use one of {sorted(SPECS)} or a JSON file")
    try:
        doc = json.loads(path.read_text())
        theta = tuple(tuple(tuple(float(v) for v in row) for row in cls) for cls in doc["theta"])
        beta = np.asarray(doc["beta"], dtype=float)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"malformed spec file {path}: {exc}") from None
    return GenerativeSpec(theta, beta, n_obs, name=path.stem)


def cmd_simulate(args) -> int:
    spec = _load_spec(args.spec, args.n)
    data, covariates, labels = generate(spec, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_responses(out / "responses.csv", data)
    write_schema(out / "schema.json", data.item_names, data.levels)
    write_covariates(out / "covariates.csv", covariates)
    truth = {
        "spec": spec.name,
        "seed": args.seed,
        "theta": [[list(map(float, row)) for row in cls] for cls in spec.theta_true],
        "beta": np.asarray(spec.beta_true).tolist(),
        "labels": (labels + 1).tolist(),
    }
    (out / "truth.json").write_text(json.dumps(truth) + "\n")
    return EXIT_OK


# --------------------------------------------------------------------------
# fit
# --------------------------------------------------------------------------


def _settings_from_args(args) -> RunSettings:
    settings = RunSettings()
    if args.config:
        read_config(args.config, settings)
    for key in ("model", "mode", "g", "n_iter", "burn_in", "thin", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            apply_setting(settings, key, str(value))
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        apply_setting(settings, key, value)
    settings.validate()
    return settings


def _run_chain(settings: RunSettings, data, covariates, g: int):
    priors = settings.priors()
    common = dict(n_classes=g, n_iter=settings.n_iter, burn_in=settings.burn_in, thin=settings.thin,
                  priors=priors, seed=settings.seed)
    if settings.model == "lca":
        return run_lca_chain(data, LcaChainConfig(item_selection=settings.mode == "item_sel", **common))
    overrides = settings.resolve_overrides(covariates.names or [])
    return run_lcr_chain(data, covariates, LcrChainConfig(mode=settings.mode, coef_variance_overrides=overrides,
                                                          **common))


def _summarize(trace, data, covariates, settings: RunSettings) -> tuple[dict, dict]:
    relabelled = stephens_relabel(trace)
    tr = relabelled.trace
    nu, gamma = posterior_inclusion_probabilities(tr)
    item_names = list(data.item_names or [f"item{j + 1}" for j in range(data.n_items)])
    pred_names = list(covariates.names) if covariates is not None and covariates.names else []
    share_mean, share_sd = class_proportions(tr)
    summary = {
        "model": trace.model,
        "mode": trace.mode,
        "n_classes": trace.n_classes,
        "n_kept": len(trace),
        "relabel": {"converged": relabelled.converged, "sweeps": relabelled.n_sweeps},
        "pip": {
            "items": dict(zip(item_names, map(float, nu))),
            "predictors": dict(zip(pred_names, map(float, gamma))),
        },
        "class_proportions": [{"class": g + 1, "mean": float(m), "sd": float(s)}
                              for g, (m, s) in enumerate(zip(share_mean, share_sd))],
        "log_posterior_mean": float(np.mean(trace.log_posterior)),
        "settings": settings.as_dict(),
    }
    if tr.beta is not None:
        rows = ["intercept"] + pred_names
        summary["coefficients"] = [
            {"predictor": rows[c.row], "class": c.cls + 1, "mean": c.mean, "sd": c.sd,
             "hdi_lower": c.hdi_lower, "hdi_upper": c.hdi_upper}
            for c in coefficient_summary(tr)
        ]
    est = minvi_point_estimate(tr.labels)
    ball = est.credible_ball
    partition = {
        "labels": (est.labels + 1).tolist(),
        "n_clusters": est.n_clusters,
        "expected_vi": est.expected_vi,
        "vi_log_base": 2,
        "credible_ball": {
            "level": ball.level,
            "radius": ball.radius,
            "horizontal": (ball.horizontal + 1).tolist(),
            "vertical_upper": (ball.vertical_upper + 1).tolist(),
            "vertical_lower": (ball.vertical_lower + 1).tolist(),
        },
    }
    return summary, partition


def _fit_one(settings: RunSettings, data, covariates, g: int, out: Path, run_meta: dict) -> dict:
    trace = _run_chain(settings, data, covariates, g)
    out.mkdir(parents=True, exist_ok=True)
    write_trace(trace, out / "trace.bin")
    summary, partition = _summarize(trace, data, covariates, settings)
    summary["n_classes"] = g
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    (out / "partition.json").write_text(json.dumps(partition, indent=2) + "\n")
    meta = dict(run_meta, g=g)
    (out / "run.json").write_text(json.dumps(meta, indent=2) + "\n")
    return partition


def _grid_worker(payload):
    settings, data, covariates, g, out, meta = payload
    return g, _fit_one(settings, data, covariates, g, Path(out), meta)


def _parse_grid(text: str) -> list[int]:
    lo, sep, hi = text.partition(":")
    try:
        grid = list(range(int(lo), int(hi) + 1)) if sep else [int(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"--g-grid expects 'lo:hi' or a comma list, got {text!r}") from None
    if not grid or min(grid) < 1:
        raise ConfigError("--g-grid needs at least one positive G")
    return grid


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def cmd_fit(args) -> int:
    settings = _settings_from_args(args)
    if settings.model == "lcr" and not args.covariates:
        raise ConfigError("lcr needs --covariates")
    data, covariates, kept = load_inputs(args.responses, args.schema,
                                         args.covariates if settings.model == "lcr" else None,
                                         drop_incomplete=args.drop_incomplete)
    out = Path(args.out)
    meta = {
        "version": __version__,
        "responses": str(Path(args.responses).resolve()),
        "schema": str(Path(args.schema).resolve()),
        "covariates": str(Path(args.covariates).resolve()) if settings.model == "lcr" else None,
        "drop_incomplete": bool(args.drop_incomplete),
        "kept_rows": kept.tolist(),
        "settings": settings.as_dict(),
    }
    if not args.g_grid:
        _fit_one(settings, data, covariates, settings.g, out, meta)
        return EXIT_OK

    grid = _parse_grid(args.g_grid)
    if settings.model == "lcr" and min(grid) < 2:
        raise ConfigError("lcr grid values must be at least 2")
    payloads = [(settings, data, covariates, g, str(out / f"G{g}"), meta) for g in grid]
    workers = min(_threads(), len(grid))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_grid_worker, payloads))
    else:
        results = dict(map(_grid_worker, payloads))
    _write_grid_table(out, grid, results)
    return EXIT_OK


def _write_grid_table(out: Path, grid, results) -> None:
    """Compare each G's estimate with the credible ball of the largest-G chain."""
    ref_g = max(grid)
    ref = results[ref_g]
    ref_labels = np.asarray(ref["labels"])
    radius = ref["credible_ball"]["radius"]
    with open(out / "grid_comparison.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["g", "n_clusters", "expected_vi", "vi_to_reference", "reference_radius",
                    "inside_reference_ball", "ari_to_reference"])
        for g in grid:
            lab = np.asarray(results[g]["labels"])
            dist = variation_of_information(lab, ref_labels)
            w.writerow([g, results[g]["n_clusters"], f"{results[g]['expected_vi']:.6f}", f"{dist:.6f}",
                        f"{radius:.6f}", int(dist <= radius + 1e-12),
                        f"{adjusted_rand_index(lab, ref_labels):.6f}"])


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------


def cmd_report(args) -> int:
    run_dir = Path(args.run)
    out = Path(args.out) if args.out else run_dir
    out.mkdir(parents=True, exist_ok=True)
    try:
        meta = json.loads((run_dir / "run.json").read_text())
    except OSError:
        raise IngestionError(f"{run_dir} has no run.json; was it produced by 'pglcr fit'?") from None
    trace = read_trace(run_dir / "trace.bin")
    data, covariates, kept = load_inputs(meta["responses"], meta["schema"], meta["covariates"],
                                         drop_incomplete=meta["drop_incomplete"])
    if data.n_obs != trace.n_obs:
        raise DimensionError("input files changed since the fit: row counts differ")
    settings = RunSettings(**{k: v for k, v in _settings_kwargs(meta["settings"]).items()})
    tr = stephens_relabel(trace).trace
    item_names = list(data.item_names)
    pred_names = list(covariates.names) if covariates is not None and covariates.names else []

    truth = None
    if args.truth:
        try:
            truth = json.loads(Path(args.truth).read_text())
        except (OSError, ValueError) as exc:
            raise IngestionError(f"cannot read truth file {args.truth}: {exc}") from None
        true_labels = np.asarray(truth["labels"], dtype=np.int64)[np.asarray(kept)] - 1
        if true_labels.max() < tr.n_classes:
            tr, _ = align_to_reference(tr, true_labels)

    nu, gamma = posterior_inclusion_probabilities(tr)
    with open(out / "pip.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "name", "pip"])
        w.writerows(["item", n, f"{v:.6f}"] for n, v in zip(item_names, nu))
        w.writerows(["predictor", n, f"{v:.6f}"] for n, v in zip(pred_names, gamma))

    theta = posthoc_theta(tr, data, settings.priors())
    with open(out / "theta_posthoc.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class", "item", "category", "mean", "sd"])
        for g in range(tr.n_classes):
            for j in np.flatnonzero(nu > 0.5):
                for k in range(int(data.levels[j])):
                    w.writerow([g + 1, item_names[j], k + 1, f"{theta.mean[g, j, k]:.6f}", f"{theta.sd[g, j, k]:.6f}"])

    if tr.beta is not None:
        rows = ["intercept"] + pred_names
        with open(out / "coefficient_summary.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["predictor", "class", "mean", "sd", "hdi_lower", "hdi_upper"])
            for c in coefficient_summary(tr):
                w.writerow([rows[c.row], c.cls + 1, f"{c.mean:.6f}", f"{c.sd:.6f}",
                            f"{c.hdi_lower:.6f}", f"{c.hdi_upper:.6f}"])
        with open(out / "coefficient_draws.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "predictor", "class", "value"])
            for t in range(len(tr)):
                for g in range(tr.n_classes - 1):
                    for r, name in enumerate(rows):
                        w.writerow([int(tr.iterations[t]), name, g + 1, repr(float(tr.beta[t, r, g]))])

    if truth is not None:
        est = minvi_point_estimate(tr.labels, level=None)
        (out / "ari.txt").write_text(f"{adjusted_rand_index(est.labels, true_labels):.6f}\n")
        if tr.beta is not None:
            beta_true = np.asarray(truth["beta"], dtype=float)
            if beta_true.shape == tr.beta.shape[1:]:
                rows = ["intercept"] + pred_names
                with open(out / "hdi_coverage.csv", "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["predictor", "class", "true", "hdi_lower", "hdi_upper", "covered"])
                    for g in range(tr.n_classes - 1):
                        for r, name in enumerate(rows):
                            lo, hi = hdi(tr.beta[:, r, g])
                            val = beta_true[r, g] - beta_true[r, -1]
                            w.writerow([name, g + 1, f"{val:.6f}", f"{lo:.6f}", f"{hi:.6f}", int(lo <= val <= hi)])
            else:
                log.warning("truth coefficients do not match the fitted shape; hdi_coverage.csv skipped")
    return EXIT_OK


def _settings_kwargs(d: dict) -> dict:
    d = dict(d)
    d["lam"] = d.pop("lambda")
    return d


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pglcr", description="Bayesian latent class analysis and regression.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="write a synthetic dataset")
    sim.add_argument("--spec", required=True, help="sim1, sim2 or a JSON file with 'theta' and 'beta'")
    sim.add_argument("--n", type=int, default=500)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="run a chain (or a grid of chains) and write its outputs")
    fit.add_argument("--responses", required=True)
    fit.add_argument("--schema", required=True)
    fit.add_argument("--covariates")
    fit.add_argument("--config", help="key = value settings file")
    fit.add_argument("--model", choices=("lca", "lcr"))
    fit.add_argument("--mode", choices=("full", "item_sel", "pred_sel", "both"))
    fit.add_argument("--g", type=int)
    fit.add_argument("--n-iter", dest="n_iter", type=int)
    fit.add_argument("--burn-in", dest="burn_in", type=int)
    fit.add_argument("--thin", type=int)
    fit.add_argument("--seed", type=int)
    fit.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    fit.add_argument("--drop-incomplete", action="store_true", help="drop rows with missing values")
    fit.add_argument("--g-grid", help="fit independent chains for G in lo:hi and compare them")
    fit.add_argument("--out", required=True)
    fit.set_defaults(func=cmd_fit)

    rep = sub.add_parser("report", help="write tables from a fitted run")
    rep.add_argument("--run", required=True, help="directory written by 'fit'")
    rep.add_argument("--truth", help="truth.json from 'simulate'")
    rep.add_argument("--out", help="output directory (default: the run directory)")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IngestionError, TraceVersionError, DimensionError, InsufficientSamplesError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INGEST
    except (NumericalSingularityError, DegenerateWeightsError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INGEST


if __name__ == "__main__":
    sys.exit(main())
