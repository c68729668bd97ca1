"""
Experiment drivers behind the command line: exact-recovery tables,
phantom reconstructions and certificate reports.

Every run is described by a flat, fully resolved parameter dictionary
(profile defaults overlaid with the config file), and all randomness in a
run flows from seeds derived with :class:`numpy.random.SeedSequence` from
the master seed and the cell coordinates. The resolved parameters, seeds and
outcomes are written to an INI manifest that is itself a valid config file,
so passing it back through ``--config`` replays the run.
"""

import configparser
import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .certificate import (
    AtomicMeasure, apply_K, certificate_width1_modified, duality_gap_estimate, verify_certificate,
)
from .forward_op import inr_coeffs, make_config, unit_coeffs, zero_fill_synthesis
from .model import InrParams, eval_inr, random_teacher
from .phantoms import (
    dot_phantom, image_mse, phantom_coeffs, random_disc_phantom, render_image,
)
from .spectral import Measurements, build_feature_map, grid_samples
from .training import MseMonitor, Regularizer, TrainConfig, al_solve, init_student, penalized_fit

logger = logging.getLogger(__name__)

COMMANDS = ("exact-recovery", "phantom", "certify")

# key -> parser; list-valued keys are comma separated
_INTS = lambda s: [int(v) for v in str(s).split(",") if v.strip()]
_FLOATS = lambda s: [float(v) for v in str(s).split(",") if v.strip()]
_STRS = lambda s: [v.strip() for v in str(s).split(",") if v.strip()]

SCHEMA = {
    "exact-recovery": {
        "K0": int, "K_list": _INTS, "W_list": _INTS, "trials": int, "regularizer": _STRS,
        "student_width": int, "mse_threshold": float, "M": int, "monitor_M": int,
        "inner_iters": int, "max_outer": int, "lr": float, "rho0": float, "rho_growth": float,
        "init_a_std": float, "tol": float,
    },
    "phantom": {
        "phantom": _STRS, "K": int, "K0": int, "width": int, "regularizer": _STRS, "lambdas": _FLOATS,
        "M": int, "eval_M": int, "lr_schedule": str, "init_a_std": float, "n_dots": int, "n_discs": int,
    },
    "certify": {
        "K0": int, "K": int, "M": int, "n_samples": int, "refine_steps": int, "step": float,
        "n_refine": int, "near_tol": float, "dual_tol": float,
    },
}

PROFILES = {
    "desk": {
        "exact-recovery": {
            "K0": "2", "K_list": "2,4,6,8,10,12", "W_list": "1,2", "trials": "5",
            "regularizer": "standard,modified", "student_width": "100", "mse_threshold": "1e-9",
            "M": "1024", "monitor_M": "1024", "inner_iters": "2000", "max_outer": "20", "lr": "0.001",
            "rho0": "1.0", "rho_growth": "2.0", "init_a_std": "0.01", "tol": "1e-12",
        },
        "phantom": {
            "phantom": "dot,disc", "K": "16", "K0": "6", "width": "64", "regularizer": "standard,modified",
            "lambdas": "0,1e-5,1e-4,1e-3", "M": "64", "eval_M": "256", "lr_schedule": "10000:0.001,2000:0.0001",
            "init_a_std": "0.01", "n_dots": "10", "n_discs": "4",
        },
        "certify": {
            "K0": "2", "K": "6", "M": "1024", "n_samples": "100000", "refine_steps": "200", "step": "0.01",
            "n_refine": "10", "near_tol": "1e-6", "dual_tol": "1e-8",
        },
    },
    "paper": {
        "exact-recovery": {
            "K0": "2", "K_list": ",".join(str(k) for k in range(2, 31, 2)), "W_list": "1,2,3,4,5",
            "trials": "10", "regularizer": "standard,modified", "student_width": "100",
            "mse_threshold": "1e-9", "M": "4096", "monitor_M": "4096", "inner_iters": "5000",
            "max_outer": "60", "lr": "0.001", "rho0": "1.0", "rho_growth": "2.0", "init_a_std": "0.01",
            "tol": "1e-12",
        },
        "phantom": {
            "phantom": "dot,disc", "K": "32", "K0": "8", "width": "128", "regularizer": "standard,modified",
            "lambdas": "0,1e-6,1e-5,1e-4,1e-3", "M": "128", "eval_M": "512",
            "lr_schedule": "40000:0.001,10000:0.0001", "init_a_std": "0.01", "n_dots": "50", "n_discs": "8",
        },
        "certify": {
            "K0": "2", "K": "6", "M": "4096", "n_samples": "100000", "refine_steps": "200", "step": "0.01",
            "n_refine": "10", "near_tol": "1e-6", "dual_tol": "1e-8",
        },
    },
}


class ConfigError(ValueError):
    pass


def load_config(command, profile=None, path=None):
    """Resolve the parameters of ``command``: profile defaults overlaid by ``path``.

    Returns ``(raw, parsed, run)`` where ``raw`` maps keys to their text form
    (written to the manifest), ``parsed`` holds typed values and ``run`` is
    the ``[run]`` section of the file (profile, seed) if any.
    """
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    run = {}
    overrides = {}
    if path is not None:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        with open(path) as fh:
            cp.read_file(fh)
        for sec in cp.sections():
            if sec == "run":
                run = dict(cp[sec])
            elif sec == "outcomes" or sec in COMMANDS:
                continue
            else:
                raise ConfigError(f"unknown config section [{sec}]")
        if cp.has_section(command):
            overrides = dict(cp[command])
    profile = profile or run.get("profile", "desk")
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    raw = dict(PROFILES[profile][command])
    schema = SCHEMA[command]
    bad = sorted(k for k in overrides if k not in schema)
    if bad:
        raise ConfigError(f"invalid key(s) in [{command}]: {', '.join(bad)}")
    raw.update(overrides)
    parsed = {}
    for key, text in raw.items():
        try:
            parsed[key] = schema[key](text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {text!r}") from exc
    return raw, parsed, {**run, "profile": profile}


def trial_seeds(master, *coords):
    """Two independent 32-bit seeds (teacher, student) for one table cell."""
    ss = np.random.SeedSequence([int(master)] + [int(c) for c in coords])
    t, s = ss.generate_state(2)
    return int(t), int(s)


def write_manifest(path, command, run, raw, outcomes):
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["run"] = {"command": command, "version": __version__, **{k: str(v) for k, v in run.items()}}
    cp[command] = raw
    cp["outcomes"] = outcomes
    with open(path, "w") as fh:
        cp.write(fh)


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


# -- exact recovery -----------------------------------------------------------

def run_trial(job):
    """One teacher/student exact-recovery trial; returns a plain dict."""
    p = job["params"]
    K, W, kind = job["K"], job["W"], job["regularizer"]
    fm = build_feature_map(p["K0"], 1)
    cfg = make_config(K, 1, p["M"])
    reg = Regularizer(kind, cfg)
    tseed, sseed = job["seeds"]
    # same admissibility test for both regularizers so paired trials share a teacher
    teacher = random_teacher(W, fm, tseed, Regularizer("modified", cfg).weighting(fm))
    y = inr_coeffs(teacher, cfg)
    ref = grid_samples(lambda x: eval_inr(teacher, x), p["monitor_M"], 1)
    monitor = MseMonitor(fm, ref, p["monitor_M"], cfg.operator(fm))
    student = init_student(fm, p["student_width"], sseed, p["init_a_std"])
    conf = TrainConfig(inner_iters=p["inner_iters"], lr=p["lr"], max_outer=p["max_outer"], rho0=p["rho0"],
                       rho_growth=p["rho_growth"], tol=p["tol"], stop_mse=p["mse_threshold"])
    rep = al_solve(student, y, reg, cfg, conf, monitor=monitor)
    success = bool(rep.best_mse < p["mse_threshold"])
    logger.info("%s K=%d W=%d trial=%d best_mse=%.3e success=%s (%.1fs)", kind, K, W, job["trial"],
                rep.best_mse, success, rep.wall_time)
    return {"regularizer": kind, "K": K, "W": W, "trial": job["trial"], "teacher_seed": tseed,
            "student_seed": sseed, "best_mse": rep.best_mse, "success": success,
            "iterations": rep.iterations, "final_constraint": float(rep.outer_constraint[-1]),
            "diverged": rep.diverged}


def exact_recovery(params, seed, workers=1):
    jobs = []
    for kind in params["regularizer"]:
        Regularizer(kind, make_config(2, 1))  # reject unknown kinds before any work
        for W in params["W_list"]:
            for K in params["K_list"]:
                for t in range(params["trials"]):
                    jobs.append({"params": params, "K": K, "W": W, "trial": t, "regularizer": kind,
                                 "seeds": trial_seeds(seed, K, W, t)})
    results = _map(run_trial, jobs, workers)
    table = []
    if params["trials"] > 0:
        for kind in params["regularizer"]:
            for W in params["W_list"]:
                for K in params["K_list"]:
                    cell = [r for r in results if (r["regularizer"], r["K"], r["W"]) == (kind, K, W)]
                    n = sum(r["success"] for r in cell)
                    table.append({"regularizer": kind, "K": K, "W": W, "trials": len(cell),
                                  "successes": n, "probability": n / len(cell)})
    return table, results


def sampling_law_contrast(table, regularizer="standard", factor=6):
    """Mean over W of P(success | K >= factor W) - P(success | K < factor W)."""
    rows = [r for r in table if r["regularizer"] == regularizer]
    diffs = []
    for W in sorted({r["W"] for r in rows}):
        hi = [r["probability"] for r in rows if r["W"] == W and r["K"] >= factor * W]
        lo = [r["probability"] for r in rows if r["W"] == W and r["K"] < factor * W]
        if hi and lo:
            diffs.append(np.mean(hi) - np.mean(lo))
    return float(np.mean(diffs)) if diffs else float("nan")


def _write_rows(path, rows, columns):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(columns)
        for r in rows:
            wr.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in columns])


def cmd_exact_recovery(out, params, raw, run, workers=1):
    table, results = exact_recovery(params, run["seed"], workers)
    out = Path(out)
    _write_rows(out / "table.csv", table, ["regularizer", "K", "W", "trials", "successes", "probability"])
    _write_rows(out / "trials.csv", results, ["regularizer", "K", "W", "trial", "teacher_seed", "student_seed",
                                              "best_mse", "success", "iterations", "final_constraint", "diverged"])
    outcomes = {f"{r['regularizer']}.K{r['K']}.W{r['W']}.t{r['trial']}":
                f"seeds={r['teacher_seed']}/{r['student_seed']} best_mse={r['best_mse']!r} success={r['success']}"
                for r in results}
    write_manifest(out / "manifest.ini", "exact-recovery", run, raw, outcomes)
    return table


# -- phantoms -----------------------------------------------------------------

def make_phantom(name, params, seed):
    ps = int(np.random.SeedSequence([int(seed), 1 if name == "dot" else 2]).generate_state(1)[0])
    if name == "dot":
        return dot_phantom(params["n_dots"], params["K0"], ps)
    if name == "disc":
        return random_disc_phantom(params["n_discs"], ps)
    raise ConfigError(f"unknown phantom {name!r}")


def fit_phantom(job):
    p = job["params"]
    ph = make_phantom(job["phantom"], p, job["seed"])
    fm = build_feature_map(p["K0"], 2)
    cfg = make_config(p["K"], 2, p["M"])
    y = phantom_coeffs(ph, cfg.omega, cfg) if ph.kind == "teacher" else phantom_coeffs(ph, cfg.omega)
    reg = Regularizer(job["regularizer"], cfg)
    student = init_student(fm, p["width"], job["student_seed"], p["init_a_std"])
    conf = TrainConfig(lr_schedule=p["lr_schedule"], lam=job["lam"])
    rep = penalized_fit(student, y, reg, cfg, conf)
    m = image_mse(ph, lambda x: eval_inr(rep.params, x), p["eval_M"])
    logger.info("%s %s lam=%g mse=%.3e (%.1fs)", job["phantom"], job["regularizer"], job["lam"], m.mse, rep.wall_time)
    return {"phantom": job["phantom"], "regularizer": job["regularizer"], "lam": job["lam"], "mse": m.mse,
            "max_abs_err": m.max_abs_err, "final_loss": float(rep.loss[-1]) if rep.iterations else float("nan"),
            "params": rep.params.to_text()}


def phantom_study(params, seed, workers=1):
    """Train every (phantom, regularizer, lambda) combination and the zero-fill baseline."""
    sseed = int(np.random.SeedSequence([int(seed), 3]).generate_state(1)[0])
    jobs = [{"params": params, "phantom": name, "regularizer": kind, "lam": lam, "seed": seed, "student_seed": sseed}
            for name in params["phantom"] for kind in params["regularizer"] for lam in params["lambdas"]]
    fits = _map(fit_phantom, jobs, workers)
    baselines = {}
    for name in params["phantom"]:
        ph = make_phantom(name, params, seed)
        cfg = make_config(params["K"], 2, params["M"])
        y = phantom_coeffs(ph, cfg.omega, cfg) if ph.kind == "teacher" else phantom_coeffs(ph, cfg.omega)
        zf = zero_fill_synthesis(y, params["eval_M"])
        baselines[name] = (ph, zf, image_mse(ph, zf, params["eval_M"]))
    return fits, baselines


def best_fits(fits):
    """Best lambda per (phantom, regularizer) by image MSE."""
    best = {}
    for f in fits:
        key = (f["phantom"], f["regularizer"])
        if key not in best or f["mse"] < best[key]["mse"]:
            best[key] = f
    return best


def cmd_phantom(out, params, raw, run, workers=1):
    out = Path(out)
    fits, baselines = phantom_study(params, run["seed"], workers)
    best = best_fits(fits)
    rows = []
    for f in fits:
        rows.append({"phantom": f["phantom"], "method": f"inr-{f['regularizer']}", "lam": f["lam"], "mse": f["mse"],
                     "max_abs_err": f["max_abs_err"], "selected": best[(f["phantom"], f["regularizer"])] is f})
    for name, (_, _, m) in baselines.items():
        rows.append({"phantom": name, "method": "zero-fill", "lam": float("nan"), "mse": m.mse,
                     "max_abs_err": m.max_abs_err, "selected": True})
    _write_rows(out / "metrics.csv", rows, ["phantom", "method", "lam", "mse", "max_abs_err", "selected"])
    M = params["eval_M"]
    for name, (ph, zf, _) in baselines.items():
        truth = render_image(ph, M, out / f"{name}_truth")
        render_image(zf, M, out / f"{name}_zerofill")
        render_image(np.abs(zf - truth), M, out / f"{name}_zerofill_absdiff")
        for kind in params["regularizer"]:
            theta = InrParams.from_text(best[(name, kind)]["params"])
            est = render_image(lambda x: eval_inr(theta, x), M, out / f"{name}_inr_{kind}")
            render_image(np.abs(est - truth), M, out / f"{name}_inr_{kind}_absdiff")
            (out / f"{name}_inr_{kind}.params.txt").write_text(best[(name, kind)]["params"])
    outcomes = {f"{r['phantom']}.{r['method']}.lam{r['lam']!r}": f"mse={r['mse']!r}" for r in rows}
    write_manifest(out / "manifest.ini", "phantom", run, raw, outcomes)
    return rows


# -- certificates -------------------------------------------------------------

def certify(params, seed):
    fm = build_feature_map(params["K0"], 1)
    cfg = make_config(params["K"], 1, params["M"])
    eta = Regularizer("modified", cfg).weighting(fm)
    tseed, vseed = trial_seeds(seed, params["K0"], params["K"])
    teacher = random_teacher(1, fm, tseed, eta)
    mu = AtomicMeasure.from_params(teacher)
    y = apply_K(mu, cfg)
    verify_kw = dict(n_samples=params["n_samples"], refine_steps=params["refine_steps"], seed=vseed,
                     step=params["step"], n_refine=params["n_refine"], near_tol=params["near_tol"])
    if params["K"] >= 3 * params["K0"]:
        cert = certificate_width1_modified(teacher.w[0], teacher.a[0], fm, cfg)
        q = cert.q
    else:
        # under-sampled: the same normalized unit spectrum, reported without optimality claims
        v0 = unit_coeffs(teacher.w[0], fm, cfg).vals
        q = Measurements(cfg.omega, np.sign(teacher.a[0]) * v0 / np.linalg.norm(v0))
    report = verify_certificate(q, "modified", fm, cfg, **verify_kw)
    try:
        gap = duality_gap_estimate(mu, q, y, eta, cfg, report=report, dual_tol=params["dual_tol"])
        gap_msg = ""
    except ValueError as exc:
        gap, gap_msg = float("nan"), str(exc)
    return teacher, q, report, gap, gap_msg


def cmd_certify(out, params, raw, run, workers=1):
    out = Path(out)
    teacher, q, report, gap, gap_msg = certify(params, run["seed"])
    report.to_csv(out / "samples.csv")
    with open(out / "certificate.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow([f"k{j + 1}" for j in range(q.freqs.dim)] + ["re", "im"])
        for k, v in zip(q.freqs.freqs, q.vals):
            wr.writerow(list(k) + [repr(float(v.real)), repr(float(v.imag))])
    summary = report.summary() + f"duality_gap = {gap!r}\n"
    if gap_msg:
        summary += f"gap_error = {gap_msg}\n"
    summary += f"violated = {report.violated(params['dual_tol'])}\n"
    summary += "teacher =\n" + teacher.to_text()
    (out / "summary.txt").write_text(summary)
    outcomes = {"max_ratio": repr(report.max_ratio), "duality_gap": repr(gap),
                "n_near_equality": str(len(report.near_equality))}
    write_manifest(out / "manifest.ini", "certify", run, raw, outcomes)
    return report, gap


HANDLERS = {"exact-recovery": cmd_exact_recovery, "phantom": cmd_phantom, "certify": cmd_certify}


def run_command(command, out, config=None, profile=None, seed=None, workers=1):
    """Resolve the configuration, run ``command`` and write outputs into ``out``."""
    raw, params, run = load_config(command, profile, config)
    if run.get("command", command) != command:
        raise ConfigError(f"manifest was written by {run['command']!r}, not {command!r}")
    if seed is None:
        seed = int(run.get("seed", 0))
    run = {"profile": run["profile"], "seed": int(seed)}
    os.makedirs(out, exist_ok=True)
    return HANDLERS[command](out, params, raw, run, workers)
