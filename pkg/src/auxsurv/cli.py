"""Command line front end: ``auxsurv {simulate,fit,predict,benchmark}``.

Every subcommand takes a JSON config and writes into an output directory
(``--out``, else ``$AUXSURV_OUTPUT_DIR``, else the config's ``output_dir``,
else the working directory). Each run writes ``manifest.json`` with the
config, seed and library versions.

Exit codes: 0 success, 2 invalid input, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .grid import Grid, build_grid
from .mcmc import ChainConfig, InitializationError, fit as fit_chain
from .outcomes import (Censoring, CountData, PoissonCounts, SurvivalData, WeibullBaseline,
                       WeibullSurvival)
from .posterior import Priors, SpatialModel
from .prediction import (DEFAULT_THRESHOLDS, baseline_hazard_band, covariance_band,
                         diagnostics, lag1_autocorrelation, quantiles,
                         summarize_field)
from .simulate import CensoringScheme, simulate_field, simulate_poisson, simulate_survival
from .spectral import CovarianceModel, NonPositiveDefinite

log = logging.getLogger("auxsurv")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
OUTPUT_ENV = "AUXSURV_OUTPUT_DIR"
SURVIVAL_COLUMNS = ("id", "event", "time", "time_lo", "time_hi", "x", "y")
COUNT_COLUMNS = ("id", "count", "x", "y")


class InputError(ValueError):
    """Bad config or data; reported with exit status 2."""


def _fmt(v) -> str:
    v = float(v)
    return "" if np.isnan(v) else repr(v)


# -- config ---------------------------------------------------------------------

def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from None
    if not isinstance(cfg, dict):
        raise InputError(f"{path}: config must be a JSON object")
    outcome = cfg.get("outcome", "survival")
    if outcome not in ("survival", "poisson"):
        raise InputError(f"config 'outcome' must be 'survival' or 'poisson', got {outcome!r}")
    baseline = cfg.get("baseline", "weibull")
    if baseline != "weibull":
        raise InputError(f"config 'baseline' must be 'weibull', got {baseline!r}")
    return cfg


def _section(cfg, name) -> dict:
    sec = cfg.get(name, {})
    if not isinstance(sec, dict):
        raise InputError(f"config section {name!r} must be an object")
    return sec


def _bbox(sec):
    b = sec.get("bbox")
    if b is None:
        return None
    if len(b) != 4:
        raise InputError("grid 'bbox' must be [xmin, ymin, xmax, ymax]")
    return tuple(float(v) for v in b)


def make_grid(cfg, locations) -> Grid:
    g = _section(cfg, "grid")
    try:
        return build_grid(np.asarray(locations, dtype=float), int(g.get("m1", 5)), int(g.get("m2", 5)),
                          float(g.get("ext_factor", 2.0)), bbox=_bbox(g))
    except ValueError as e:
        raise InputError(f"grid: {e}") from None


def make_priors(cfg) -> Priors:
    c = _section(cfg, "covariance")
    p = dict(_section(c, "priors"))
    for key in ("log_sigma", "log_phi", "log_sigma_u"):
        if p.get(key) is not None:
            p[key] = tuple(float(v) for v in p[key])
    try:
        return Priors(**p)
    except TypeError as e:
        raise InputError(f"covariance priors: {e}") from None
    except ValueError as e:
        raise InputError(f"covariance priors: {e}") from None


def _kind_nu(cfg):
    c = _section(cfg, "covariance")
    kind = c.get("kind", "exponential")
    if kind not in ("exponential", "matern"):
        raise InputError(f"covariance 'kind' must be 'exponential' or 'matern', got {kind!r}")
    return kind, float(c.get("nu", 1.0))


def chain_config(cfg) -> ChainConfig:
    m = _section(cfg, "mcmc")
    try:
        return ChainConfig(n_iterations=int(float(m.get("iterations", 10000))),
                           burnin=int(float(m.get("burnin", 0))), thin=int(float(m.get("thin", 1))),
                           seed=int(m.get("seed", 0)), workers=int(m.get("workers", 1)),
                           adapt_after_burnin=bool(m.get("adapt_after_burnin", False)))
    except ValueError as e:
        raise InputError(f"mcmc: {e}") from None


def output_dir(args, cfg) -> Path:
    out = args.out or os.environ.get(OUTPUT_ENV) or cfg.get("output_dir") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_manifest(out: Path, command: str, cfg: dict, seed, files) -> None:
    manifest = {"command": command, "config": cfg, "seed": seed, "files": sorted(files),
                "versions": {"auxsurv": __version__, "numpy": np.__version__,
                             "scipy": scipy.__version__, "python": sys.version.split()[0]}}
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- data files -----------------------------------------------------------------

def _number(value, row, col, path, allow_empty=False):
    if value is None or value.strip() == "":
        if allow_empty:
            return np.nan
        raise InputError(f"{path}: row {row}, column {col!r}: missing value")
    try:
        v = float(value)
    except ValueError:
        raise InputError(f"{path}: row {row}, column {col!r}: {value!r} is not a number") from None
    if not np.isfinite(v):
        raise InputError(f"{path}: row {row}, column {col!r}: {value!r} is not finite")
    return v


def _read_rows(path):
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames
            if not header:
                raise InputError(f"{path}: empty file or missing header")
            rows = list(reader)
    except FileNotFoundError:
        raise InputError(f"data file not found: {path}") from None
    return [h.strip() for h in header], rows


def read_survival_csv(path) -> SurvivalData:
    """Parse the survival schema; row numbers in errors count the header as row 1."""
    header, rows = _read_rows(path)
    for col in ("id", "event", "x", "y"):
        if col not in header:
            raise InputError(f"{path}: missing required column {col!r}")
    covs = [h for h in header if h not in SURVIVAL_COLUMNS]
    codes = {c.value for c in Censoring}
    ids, event, t, t2, loc, X = [], [], [], [], [], []
    for r, rec in enumerate(rows, start=2):
        rec = {k.strip(): v for k, v in rec.items() if k is not None}
        raw = (rec.get("event") or "").strip()
        if raw not in {str(c) for c in codes}:
            raise InputError(f"{path}: row {r}, column 'event': unknown censoring code {raw!r} "
                             f"(expected 0, 1, 2 or 3)")
        ev = int(raw)
        if ev == Censoring.INTERVAL:
            for col in ("time_lo", "time_hi"):
                if col not in header:
                    raise InputError(f"{path}: row {r}: interval record needs column {col!r}")
            lo = _number(rec.get("time_lo"), r, "time_lo", path)
            hi = _number(rec.get("time_hi"), r, "time_hi", path)
            if not 0 < lo < hi:
                raise InputError(f"{path}: row {r}: interval needs 0 < time_lo < time_hi")
        else:
            if "time" not in header:
                raise InputError(f"{path}: row {r}: missing column 'time'")
            lo, hi = _number(rec.get("time"), r, "time", path), np.nan
            if lo <= 0:
                raise InputError(f"{path}: row {r}, column 'time': must be positive")
        ids.append(rec["id"])
        event.append(ev)
        t.append(lo)
        t2.append(hi)
        loc.append((_number(rec.get("x"), r, "x", path), _number(rec.get("y"), r, "y", path)))
        X.append([_number(rec.get(c), r, c, path) for c in covs])
    if not ids:
        raise InputError(f"{path}: no data rows")
    return SurvivalData(np.array(event), np.array(t), np.array(loc), np.array(X).reshape(len(ids), -1),
                        np.array(t2), ids, covs)


def read_count_csv(path) -> CountData:
    header, rows = _read_rows(path)
    for col in COUNT_COLUMNS:
        if col not in header:
            raise InputError(f"{path}: missing required column {col!r}")
    covs = [h for h in header if h not in COUNT_COLUMNS]
    ids, z, loc, X = [], [], [], []
    for r, rec in enumerate(rows, start=2):
        rec = {k.strip(): v for k, v in rec.items() if k is not None}
        v = _number(rec.get("count"), r, "count", path)
        if v < 0 or v != np.round(v):
            raise InputError(f"{path}: row {r}, column 'count': must be a non-negative integer")
        ids.append(rec["id"])
        z.append(int(v))
        loc.append((_number(rec.get("x"), r, "x", path), _number(rec.get("y"), r, "y", path)))
        X.append([_number(rec.get(c), r, c, path) for c in covs])
    if not ids:
        raise InputError(f"{path}: no data rows")
    return CountData(np.array(z), np.array(loc), np.array(X).reshape(len(ids), -1), ids, covs)


def write_survival_csv(path, data: SurvivalData) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(SURVIVAL_COLUMNS) + list(data.covariate_names))
        for i in range(data.n):
            itv = data.event[i] == Censoring.INTERVAL
            w.writerow([data.ids[i], int(data.event[i]),
                        "" if itv else _fmt(data.t[i]),
                        _fmt(data.t[i]) if itv else "", _fmt(data.t2[i]) if itv else "",
                        _fmt(data.locations[i, 0]), _fmt(data.locations[i, 1])]
                       + [_fmt(v) for v in data.X[i]])


def write_count_csv(path, data: CountData) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(COUNT_COLUMNS) + list(data.covariate_names))
        for i in range(data.n):
            w.writerow([data.ids[i], int(data.z[i]), _fmt(data.locations[i, 0]),
                        _fmt(data.locations[i, 1])] + [_fmt(v) for v in data.X[i]])


@dataclass
class SampleSet:
    """Retained draws read back from ``samples.csv``."""
    iterations: np.ndarray
    log_posterior: np.ndarray
    beta: np.ndarray
    omega_t: np.ndarray
    eta_t: np.ndarray
    Y: np.ndarray
    bo_names: list
    eta_names: list
    kind: str = "exponential"
    nu: float = 1.0

    @property
    def bo(self):
        return np.hstack([self.beta, self.omega_t])


def write_samples(path, chain, n_beta: int) -> None:
    names = ["iteration", "log_posterior"] + chain.bo_names + chain.eta_names
    names += [f"Y{j}" for j in range(chain.Y.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for i in range(chain.n_samples):
            row = [int(chain.iterations[i]), _fmt(chain.log_posterior[i])]
            row += [_fmt(v) for v in chain.bo[i]] + [_fmt(v) for v in chain.eta_t[i]]
            row += [_fmt(v) for v in chain.Y[i]]
            w.writerow(row)
    with open(Path(path).with_suffix(".meta.json"), "w") as fh:
        json.dump({"n_beta": n_beta, "kind": chain.kind, "nu": chain.nu}, fh, sort_keys=True)
        fh.write("\n")


def read_samples(path) -> SampleSet:
    header, rows = _read_rows(path)
    meta_path = Path(path).with_suffix(".meta.json")
    if not meta_path.exists():
        raise InputError(f"missing companion file {meta_path}")
    meta = json.loads(meta_path.read_text())
    if not rows:
        raise InputError(f"{path}: no samples")
    arr = np.array([[_number(rec[h], r, h, path) for h in header]
                    for r, rec in enumerate(rows, start=2)])
    y_cols = [j for j, h in enumerate(header) if h.startswith("Y") and h[1:].isdigit()]
    eta_cols = [j for j, h in enumerate(header) if h.startswith("log_sigma") or h == "log_phi"]
    bo_cols = [j for j in range(2, len(header)) if j not in y_cols and j not in eta_cols]
    p = int(meta["n_beta"])
    bo = arr[:, bo_cols]
    return SampleSet(arr[:, 0].astype(np.int64), arr[:, 1], bo[:, :p], bo[:, p:], arr[:, eta_cols],
                     arr[:, y_cols], [header[j] for j in bo_cols], [header[j] for j in eta_cols],
                     meta.get("kind", "exponential"), float(meta.get("nu", 1.0)))


def write_cells(path, grid: Grid) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["column", "cell", "x", "y", "in_window"])
        for j in range(grid.m):
            w.writerow([f"Y{j}", j, _fmt(grid.centroids[j, 0]), _fmt(grid.centroids[j, 1]),
                        int(grid.obs_mask[j])])


def read_cells(path):
    header, rows = _read_rows(path)
    for col in ("cell", "x", "y", "in_window"):
        if col not in header:
            raise InputError(f"{path}: missing required column {col!r}")
    cells = np.array([int(_number(rec["cell"], r, "cell", path)) for r, rec in enumerate(rows, 2)])
    xy = np.array([(_number(rec["x"], r, "x", path), _number(rec["y"], r, "y", path))
                   for r, rec in enumerate(rows, 2)])
    mask = np.array([rec["in_window"].strip() == "1" for rec in rows])
    return cells, xy, mask


def _write_table(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


# -- subcommands ------------------------------------------------------------------

def cmd_simulate(args, cfg) -> int:
    s = _section(cfg, "simulate")
    seed = int(s.get("seed", 0))
    bbox = _bbox(_section(cfg, "grid")) or tuple(float(v) for v in s.get("bbox", (0.0, 0.0, 1.0, 1.0)))
    corners = np.array([[bbox[0], bbox[1]], [bbox[2], bbox[3]]])
    cfg_grid = dict(cfg)
    cfg_grid["grid"] = dict(_section(cfg, "grid"), bbox=list(bbox))
    grid = make_grid(cfg_grid, corners)
    kind, nu = _kind_nu(cfg)
    sigma, phi = float(s.get("sigma", 0.5)), float(s.get("phi", 0.2 * (bbox[2] - bbox[0])))
    beta = [float(b) for b in s.get("beta", [0.5, -0.3])]
    n = int(s.get("n", 100))
    ss = np.random.SeedSequence(seed).spawn(2)
    Y, _ = simulate_field(grid, CovarianceModel(kind, sigma ** 2, phi, nu), np.random.default_rng(ss[0]))
    out = output_dir(args, cfg)
    truth = {"beta": beta, "sigma": sigma, "phi": phi, "kind": kind, "nu": nu,
             "Y": [float(v) for v in Y]}
    if cfg.get("outcome", "survival") == "poisson":
        sim = simulate_poisson(n, beta, Y, grid, np.random.default_rng(ss[1]))
        write_count_csv(out / "data.csv", sim.data)
    else:
        c = _section(s, "censoring")
        scheme = CensoringScheme(c.get("admin_time"), float(c.get("left_rate", 0.0)),
                                 float(c.get("interval_rate", 0.0)))
        alpha, lam = float(s.get("alpha", 0.8)), float(s.get("lambda", 0.01))
        sim = simulate_survival(n, beta, WeibullBaseline(alpha, lam), Y, grid, scheme,
                                np.random.default_rng(ss[1]))
        write_survival_csv(out / "data.csv", sim.data)
        truth.update(alpha=alpha, **{"lambda": lam})
    with open(out / "truth.json", "w") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(out, "simulate", cfg, seed, ["data.csv", "truth.json"])
    log.info("wrote %d records to %s", n, out / "data.csv")
    return EXIT_OK


def _diagnostics_rows(chain, priors, mask):
    d = diagnostics(chain, priors, mask=mask)
    rows = []
    params = dict(zip(chain.bo_names, chain.bo.T))
    params.update(zip(chain.eta_names, chain.eta_t.T))
    for name, x in params.items():
        q = quantiles(x)
        rows.append([name, float(np.mean(x)), float(np.std(x, ddof=1)), float(q[0]), float(q[1]),
                     float(q[2]), float(d.parameter_lag1[name])])
    lp = chain.log_posterior
    rows.append(["log_posterior", float(np.mean(lp)), float(np.std(lp, ddof=1))]
                + [float(v) for v in quantiles(lp)] + [float(lag1_autocorrelation(lp))])
    return rows, d


def cmd_fit(args, cfg) -> int:
    if not args.data:
        raise InputError("fit needs --data")
    outcome_kind = cfg.get("outcome", "survival")
    if outcome_kind == "poisson":
        data = read_count_csv(args.data)
        outcome = PoissonCounts(data)
    else:
        data = read_survival_csv(args.data)
        outcome = WeibullSurvival(data)
    grid = make_grid(cfg, data.locations)
    kind, nu = _kind_nu(cfg)
    priors = make_priors(cfg)
    model = SpatialModel(outcome, grid, priors, kind, nu)
    config = chain_config(cfg)
    if config.n_retained < 3:
        raise InputError("mcmc settings retain fewer than 3 samples")
    out = output_dir(args, cfg)
    executor = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        chain = fit_chain(model, config, executor)
    finally:
        if executor is not None:
            executor.shutdown()
    write_samples(out / "samples.csv", chain, model.p)
    write_cells(out / "cells.csv", grid)
    rows, d = _diagnostics_rows(chain, priors, grid.obs_mask)
    _write_table(out / "diagnostics.csv", ["parameter", "mean", "sd", "q025", "q50", "q975", "lag1"], rows)
    _write_table(out / "field_lag1.csv", ["column", "lag1"],
                 [[f"Y{j}", float(a)] for j, a in zip(np.flatnonzero(grid.obs_mask), d.lag1)])
    summary = {"acceptance_rate": chain.acceptance_rate, "final_h": chain.scalings.h,
               "n_retained": chain.n_samples, "white_noise_bound": d.white_noise_bound,
               "field_lag1_range": list(d.lag1_range), "field_lag1_central95": list(d.lag1_central95)}
    with open(out / "fit_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(out, "fit", cfg, config.seed,
                   ["samples.csv", "samples.meta.json", "cells.csv", "diagnostics.csv",
                    "field_lag1.csv", "fit_summary.json"])
    log.info("retained %d samples, acceptance %.3f", chain.n_samples, chain.acceptance_rate)
    return EXIT_OK


def cmd_predict(args, cfg) -> int:
    if not args.samples:
        raise InputError("predict needs --samples")
    chain = read_samples(args.samples)
    cells_path = args.cells or str(Path(args.samples).with_name("cells.csv"))
    cells, xy, mask = read_cells(cells_path)
    if len(cells) != chain.Y.shape[1]:
        raise InputError(f"{cells_path} lists {len(cells)} cells but samples have {chain.Y.shape[1]}")
    p = _section(cfg, "prediction")
    thresholds = tuple(float(c) for c in p.get("thresholds", DEFAULT_THRESHOLDS))
    try:
        fs = summarize_field(chain.Y, thresholds, None if p.get("full_grid") else mask)
    except ValueError as e:
        raise InputError(f"predict: {e}") from None
    out = output_dir(args, cfg)
    header = ["cell", "x", "y", "mean", "q025", "q50", "q975"] + [f"p_exceed_{c:g}" for c in thresholds]
    rows = []
    for k, j in enumerate(fs.cells):
        rows.append([int(cells[j]), float(xy[j, 0]), float(xy[j, 1]), float(fs.mean[k])]
                    + [float(v) for v in fs.quantiles[:, k]] + [float(v) for v in fs.exceedance[:, k]])
    _write_table(out / "field_summary.csv", header, rows)
    files = ["field_summary.csv"]

    def curve(name, band, xname):
        _write_table(out / name, [xname, "lower", "median", "upper"],
                     [[float(a), float(b), float(c), float(d)]
                      for a, b, c, d in zip(band.x, band.lower, band.median, band.upper)])
        files.append(name)

    if chain.omega_t.shape[1] == 2:
        times = p.get("times") or list(np.linspace(0.0, 1.0, 51)[1:] * float(p.get("max_time", 10.0)))
        curve("baseline_hazard.csv", baseline_hazard_band(chain, times), "time")
    dists = p.get("distances") or list(np.linspace(0.0, float(p.get("max_distance", 1.0)), 51))
    curve("covariance.csv", covariance_band(chain, dists), "distance")
    write_manifest(out, "predict", cfg, None, files)
    return EXIT_OK


def cmd_benchmark(args, cfg) -> int:
    from .dense import benchmark, loglog_slope, write_timings

    b = _section(cfg, "benchmark")
    kw = {k: b[k] for k in ("dense_sizes", "fourier_sizes", "output_grids", "iterations", "reps",
                            "seed", "phi", "threads") if k in b}
    rows = benchmark(**kw)
    out = output_dir(args, cfg)
    write_timings(rows, out / "timings.csv")
    for method in ("dense", "fourier"):
        sel = [r for r in rows if r.method == method]
        if len(sel) > 1:
            log.info("%s log-log slope %.3f", method,
                     loglog_slope([r.n for r in sel], [r.seconds_per_1000_iter for r in sel]))
    write_manifest(out, "benchmark", cfg, kw.get("seed", 1), ["timings.csv"])
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "predict": cmd_predict,
            "benchmark": cmd_benchmark}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="auxsurv", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"auxsurv {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON configuration file")
        sp.add_argument("--out", help=f"output directory (overrides ${OUTPUT_ENV})")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "fit":
            sp.add_argument("--data", required=True, help="data CSV")
        if name == "predict":
            sp.add_argument("--samples", required=True, help="samples.csv written by fit")
            sp.add_argument("--cells", help="cells.csv (default: next to the samples)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except NonPositiveDefinite as e:
        phi = f" at phi={e.phi:.6g}" if e.phi is not None else ""
        print(f"numerical abort: covariance not positive definite{phi} (min eigenvalue "
              f"{e.min_eig:.3g}). Increase grid.ext_factor or tighten the log_phi prior.",
              file=sys.stderr)
        return EXIT_NUMERICAL
    except InitializationError as e:
        print(f"numerical abort: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
