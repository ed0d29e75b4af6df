"""Experiment runner CLI.

Subcommands map one-to-one onto the library: ``theta`` prints quadrature
parameters, ``spectrum`` samples ensembles and writes eigenvalue/histogram
files, ``predict`` writes the closed-form outlier report, ``moments`` tables
the census formula against a Monte Carlo trace, ``figure`` reproduces the
three standard panel experiments as data files, and ``loss`` evaluates the
ridge-loss functional.  All outputs are plain CSV/JSON and byte-stable for a
fixed seed (timing never enters data files).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .activations import parse_activation, theta_params
from .combinatorics import enumerate_admissible, moment_formula, monte_carlo_moments
from .config import ExperimentConfig, load_config
from .distributions import parse_distribution
from .ensemble import (
    SURROGATE_VARIANTS,
    Shape,
    conjugate_kernel_factor,
    linear_surrogate_factor,
)
from .errors import CklabError, ConfigError
from .parallel import run_trials
from .spectra import companion_spectrum, full_spectrum, histogram, ridge_loss_spectral
from .theory import bbp_prediction, classify_outliers, mp_density, mp_edges

__all__ = ["main"]

_FIGURES = {
    "nonuniv": {
        "title": "outlier position depends on the entry law of W",
        "activation": "evenmono(k=1,normalize=true)",
        "panels": [
            {"dist_w": "rademacher", "dist_x": "rademacher", "phi": 0.1, "psi": 1.0},
            {"dist_w": "mix(0.25*rademacher+0.75*gaussian)", "dist_x": "rademacher",
             "phi": 0.1, "psi": 1.0},
            {"dist_w": "gaussian(var=1.0)", "dist_x": "rademacher", "phi": 0.1, "psi": 1.0},
        ],
    },
    "theta3": {
        "title": "outliers appear as the half-curvature parameter grows",
        "panels": [
            {"activation": "cos(alpha=2.0)"},
            {"activation": "cos(alpha=1.5)"},
            {"activation": "cos(alpha=0.8)"},
        ],
        "dist_w": "gaussian(var=1.0)",
        "dist_x": "mix(0.5*rademacher+0.5*gaussian)",
        "phi": 0.1,
        "psi": 1.0,
    },
    "archi": {
        "title": "outlier count depends on the layer dimensions",
        "activation": "evenmono(k=1,normalize=true)",
        "dist_w": "gaussian(var=1.0)",
        "dist_x": "mix(0.5*rademacher+0.5*gaussian)",
        "panels": [
            {"phi": 0.7, "psi": 1.5},
            {"phi": 0.3, "psi": 1.5},
            {"phi": 0.07, "psi": 1.0},
        ],
    },
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except CklabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--trials", type=int, help="number of Monte Carlo trials")
    common.add_argument("--n0", type=int, help="inner dimension")
    common.add_argument("--n1", type=int, help="number of rows of the factor")
    common.add_argument("--m", type=int, help="number of columns of the factor")
    common.add_argument("--out", help="output directory")
    common.add_argument("--convention", choices=["paper", "covariant"],
                        help="headline convention for outlier predictions")
    common.add_argument("--threads", type=int,
                        help="trial worker threads (CKLAB_THREADS env var overrides)")
    common.add_argument("--dist-w", dest="dist_w", help="entry law of W")
    common.add_argument("--dist-x", dest="dist_x", help="entry law of X")
    common.add_argument("--activation", help="activation spec")
    common.add_argument("--bins", help="histogram bins: 'fd' or an integer")

    parser = argparse.ArgumentParser(
        prog="cklab",
        description="simulate nonlinear kernel spectra and predict their outliers",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("theta", parents=[common],
                       help="print the activation's Gaussian-moment parameters")
    p.set_defaults(func=cmd_theta)

    p = sub.add_parser("spectrum", parents=[common],
                       help="sample an ensemble and write spectrum files")
    p.add_argument("--model", default="nonlinear",
                   choices=("nonlinear",) + SURROGATE_VARIANTS)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("predict", parents=[common],
                       help="closed-form largest-eigenvalue prediction")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("moments", parents=[common],
                       help="census moment formula vs Monte Carlo trace")
    p.add_argument("--qmax", type=int, default=3, help="largest moment order (<= 6)")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("figure", parents=[common],
                       help="reproduce a three-panel experiment as data files")
    p.add_argument("name", choices=sorted(_FIGURES))
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("loss", parents=[common],
                       help="ridge-loss spectral functional for a penalty")
    p.add_argument("--penalty", type=float, required=True)
    p.set_defaults(func=cmd_loss)
    return parser


def _resolve_config(args, need_shape: bool = True) -> ExperimentConfig:
    base = load_config(args.config) if args.config else None

    def pick(key, default):
        v = getattr(args, key, None)
        if v is not None:
            return v
        if base is not None:
            return getattr(base, key)
        return default

    dims = {k: pick(k, None) for k in ("n0", "n1", "m")}
    if any(v is None for v in dims.values()):
        if need_shape:
            missing = sorted(k for k, v in dims.items() if v is None)
            raise ConfigError(
                f"shape field(s) {missing} required (set via --config or flags)"
            )
        dims = {k: (v if v is not None else 2) for k, v in dims.items()}
    return ExperimentConfig(
        n0=dims["n0"], n1=dims["n1"], m=dims["m"],
        dist_w=pick("dist_w", "gaussian(var=1.0)"),
        dist_x=pick("dist_x", "gaussian(var=1.0)"),
        activation=pick("activation", "identity"),
        trials=pick("trials", 1),
        seed=pick("seed", 0),
        out=pick("out", "cklab-out"),
        convention=pick("convention", "covariant"),
        bins=pick("bins", "fd"),
    )


def _outdir(cfg: ExperimentConfig) -> Path:
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _theta_block(cfg: ExperimentConfig):
    act = parse_activation(cfg.activation)
    dw = parse_distribution(cfg.dist_w)
    dx = parse_distribution(cfg.dist_x)
    sigma = math.sqrt(dw.variance * dx.variance)
    tp = theta_params(act, sigma)
    return act, dw, dx, tp


def _histogram_doc(eigs, bins):
    edges, dens = histogram(eigs, bins=bins)
    mass = float(np.sum(dens * np.diff(edges)))
    if abs(mass - 1.0) > 1e-6:
        raise CklabError(f"histogram mass {mass!r} deviates from 1 beyond 1e-6")
    return edges, dens


def cmd_theta(args) -> int:
    cfg = _resolve_config(args, need_shape=False)
    act, _, _, tp = _theta_block(cfg)
    doc = {
        "activation": cfg.activation,
        "smooth_hypotheses": act.smooth,
        **tp.as_dict(),
    }
    print(json.dumps(doc, sort_keys=True, indent=1))
    _write_json(_outdir(cfg) / "theta.json", doc)
    return 0


def _factor_builder(cfg: ExperimentConfig, model: str):
    shape = cfg.shape()
    act, dw, dx, tp = _theta_block(cfg)
    if model == "nonlinear":
        return lambda t: conjugate_kernel_factor(shape, dw, dx, act, cfg.seed, trial=t)
    kw, kx = dw.excess_kurtosis, dx.excess_kurtosis
    return lambda t: linear_surrogate_factor(
        shape, tp, kw, kx, model, cfg.seed, trial=t
    )


def cmd_spectrum(args) -> int:
    cfg = _resolve_config(args)
    build = _factor_builder(cfg, args.model)
    results = run_trials(lambda t: full_spectrum(build(t)), cfg.trials, args.threads)
    out = _outdir(cfg)
    pooled = np.concatenate([r.eigenvalues for r in results])
    with open(out / "eigenvalues.csv", "w") as fh:
        for v in pooled:
            fh.write(f"{float(v)!r}\n")
    edges, dens = _histogram_doc(pooled, cfg.bins)
    _write_csv(out / "histogram.csv", "bin_left,bin_right,density",
               zip(edges[:-1], edges[1:], dens))
    doc = {
        "model": args.model,
        "config": cfg.canonical(),
        "trials": cfg.trials,
        "lambda1_per_trial": [r.lambda1 for r in results],
        "eigenvalue_count": int(pooled.size),
    }
    _write_json(out / "spectrum.json", doc)
    lam1 = np.array(doc["lambda1_per_trial"])
    print(f"{args.model}: lambda1 mean {lam1.mean():.6g} over {cfg.trials} trial(s); "
          f"files in {out}")
    return 0


def cmd_predict(args) -> int:
    cfg = _resolve_config(args)
    _, dw, dx, tp = _theta_block(cfg)
    shape = cfg.shape()
    kappa = max(dw.excess_kurtosis, dx.excess_kurtosis)
    report = bbp_prediction(tp, kappa, shape.phi, shape.psi, cfg.convention)
    doc = report.to_json(_outdir(cfg) / "prediction.json")
    print(json.dumps(doc, sort_keys=True, indent=1))
    return 0


def cmd_moments(args) -> int:
    cfg = _resolve_config(args)
    if not 1 <= args.qmax <= 6:
        raise ConfigError(f"--qmax must be in 1..6, got {args.qmax}")
    shape = cfg.shape()
    _, dw, dx, tp = _theta_block(cfg)
    out = _outdir(cfg)
    qs = list(range(1, args.qmax + 1))
    estimates = monte_carlo_moments(
        shape, dw, dx, parse_activation(cfg.activation), qs,
        cfg.trials, cfg.seed, workers=args.threads,
    )
    rows = []
    for q in qs:
        census = enumerate_admissible(q)
        census.to_csv(out / f"census_q{q}.csv")
        formula = moment_formula(q, tp, shape.phi, shape.psi, census)
        est = estimates[q]
        gap = abs(formula - est.value)
        rows.append((q, formula, est.value, est.stderr,
                     gap, gap / est.stderr if est.stderr > 0 else float("inf")))
    _write_csv(out / "moments.csv",
               "q,formula,monte_carlo,stderr,abs_diff,diff_over_stderr", rows)
    for q, formula, value, stderr, gap, ratio in rows:
        print(f"q={int(q)}: formula {formula:.6g}  mc {value:.6g} +- {stderr:.2g} "
              f"({ratio:.2f} se)")
    return 0


def cmd_figure(args) -> int:
    cfg = _resolve_config(args, need_shape=False)
    spec = _FIGURES[args.name]
    n1 = args.n1 if args.n1 is not None else 2000
    out = _outdir(cfg)
    meta = {"figure": args.name, "title": spec["title"], "n1": n1,
            "trials": cfg.trials, "seed": cfg.seed, "panels": []}
    for idx, panel in enumerate(spec["panels"], start=1):
        merged = {k: spec[k] for k in ("activation", "dist_w", "dist_x", "phi", "psi")
                  if k in spec}
        merged.update(panel)
        pcfg = ExperimentConfig(
            n0=round(merged["psi"] * n1),
            n1=n1,
            m=round(merged["psi"] * n1 / merged["phi"]),
            dist_w=merged["dist_w"],
            dist_x=merged["dist_x"],
            activation=merged["activation"],
            trials=cfg.trials,
            seed=cfg.seed,
            out=cfg.out,
            convention=cfg.convention,
            bins=cfg.bins,
        )
        panel_meta = _run_panel(pcfg, out, f"{args.name}_panel{idx}", args.threads)
        meta["panels"].append(panel_meta)
        print(f"panel {idx}: {panel_meta['detected_outliers_per_trial']} outlier(s) "
              f"per trial; expected {panel_meta['expected_outlier_count']}")
    _write_json(out / f"{args.name}_meta.json", meta)
    return 0


def _run_panel(cfg: ExperimentConfig, out: Path, stem: str, threads) -> dict:
    shape = cfg.shape()
    _, dw, dx, tp = _theta_block(cfg)
    build = _factor_builder(cfg, "nonlinear")
    results = run_trials(lambda t: full_spectrum(build(t)), cfg.trials, threads)
    pooled = np.concatenate([r.eigenvalues for r in results])

    gamma = shape.gamma
    lo, hi = mp_edges(gamma, tp.theta1)
    edges, dens = _histogram_doc(pooled, cfg.bins)
    _write_csv(out / f"{stem}_hist.csv", "bin_left,bin_right,density",
               zip(edges[:-1], edges[1:], dens))
    xs = np.linspace(lo, hi, 513)
    _write_csv(out / f"{stem}_mp.csv", "x,density",
               zip(xs, mp_density(xs, gamma, tp.theta1)))

    predictions = {}
    expected = 0
    for name, kappa in (("kappa_w", dw.excess_kurtosis), ("kappa_x", dx.excess_kurtosis)):
        report = bbp_prediction(tp, kappa, shape.phi, shape.psi, cfg.convention)
        predictions[name] = report.to_json()
        expected += int(report.supercritical)
    per_trial = [
        [float(v) for v in classify_outliers(r, hi)] for r in results
    ]
    doc = {
        "config": cfg.canonical(),
        "bulk_edge_high": hi,
        "bulk_edge_low": lo,
        "outliers_per_trial": per_trial,
        "expected_outlier_count": expected,
        "predictions": predictions,
    }
    _write_json(out / f"{stem}_outliers.json", doc)
    return {
        "stem": stem,
        "config": cfg.canonical(),
        "expected_outlier_count": expected,
        "detected_outliers_per_trial": [len(o) for o in per_trial],
    }


def cmd_loss(args) -> int:
    cfg = _resolve_config(args)
    if args.penalty <= 0:
        raise ConfigError(f"--penalty must be positive, got {args.penalty}")
    build = _factor_builder(cfg, "nonlinear")

    def one(t: int) -> float:
        spectrum = full_spectrum(build(t))
        return ridge_loss_spectral(companion_spectrum(spectrum), args.penalty)

    values = run_trials(one, cfg.trials, args.threads)
    doc = {
        "penalty": args.penalty,
        "config": cfg.canonical(),
        "per_trial": values,
        "mean": float(np.mean(values)),
    }
    _write_json(_outdir(cfg) / "loss.json", doc)
    print(f"ridge loss at penalty {args.penalty:g}: {doc['mean']:.8g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
