"""
Generalized weight decay, the penalized least-squares objective, Adam, and
an augmented Lagrangian solver for

    min_theta R(theta)  s.t.  F_Omega f_theta = y.

All gradients are derived by hand. With the rectangle-rule operator the
data term and both regularizers are piecewise quadratic in theta, so the
only non-smoothness comes from grid points where some w_i . gamma vanishes;
the ReLU derivative there is taken to be 0.
"""

import configparser
import csv
import ctypes
import ctypes.util
import functools
import logging
import sys
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .model import InrParams, sample_sphere

logger = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@functools.cache
def _keep_temporaries_on_heap():
    """Raise glibc's mmap and trim thresholds (once per process).

    Every Adam step allocates and frees several (width, M^d) arrays. Under
    the default dynamic thresholds these can land in fresh mmaps, and the
    page faults then cost more than the arithmetic (up to 4x per step on
    small d = 1 problems). No-op off glibc.
    """
    if not sys.platform.startswith("linux"):
        return False
    try:
        libc = ctypes.CDLL(ctypes.util.find_library("c") or "libc.so.6")
        # M_MMAP_THRESHOLD = -3, M_TRIM_THRESHOLD = -1
        return bool(libc.mallopt(-3, 32 << 20)) and bool(libc.mallopt(-1, 64 << 20))
    except (OSError, AttributeError):
        return False


class Regularizer:
    """Generalized weight decay R(theta) = 1/2 sum_i (a_i^2 + eta(w_i)^2).

    Parameters
    ----------
    kind : {"standard", "modified"}
        ``standard`` uses eta(w) = |w|_2, ``modified`` uses
        eta(w) = |F_Omega [w.gamma]_+|_2 which needs the forward config.
    cfg : ForwardConfig, optional
    """

    def __init__(self, kind, cfg=None):
        if kind in ("standard-wd", "std"):
            kind = "standard"
        if kind in ("modified-wd", "mod"):
            kind = "modified"
        if kind not in ("standard", "modified"):
            raise ValueError(f"unknown regularizer {kind!r}")
        if kind == "modified" and cfg is None:
            raise ValueError("modified weight decay needs a forward config")
        self.kind = kind
        self.cfg = cfg

    def __repr__(self):
        return f"Regularizer({self.kind!r})"

    def eta(self, w, fm=None):
        """Weighting function on inner weights of shape (..., D)."""
        w = np.asarray(w, dtype=float)
        if self.kind == "standard":
            return np.linalg.norm(w, axis=-1)
        if fm is None:
            raise ValueError("modified eta needs the feature map")
        op = self.cfg.operator(fm)
        flat = w.reshape(-1, w.shape[-1])
        return op.eta(flat).reshape(w.shape[:-1])

    def weighting(self, fm):
        """eta bound to a feature map, as used by :func:`~.model.rebalance`."""
        return lambda w: self.eta(w, fm)


def reg_value(theta, reg):
    """R(theta) for an :class:`InrParams`."""
    e = reg.eta(theta.w, theta.fm)
    return 0.5 * float(np.sum(theta.a ** 2) + np.sum(e ** 2))


@dataclass
class TrainConfig:
    inner_iters: int = 5000
    lr: float = 1e-3
    # optional step decay: "iters:lr,iters:lr" phases replacing inner_iters/lr
    lr_schedule: str = ""
    lam: float = 0.0
    max_outer: int = 60
    rho0: float = 1.0
    rho_growth: float = 2.0
    tol: float = 1e-12
    seed: int = 0
    # success threshold on the running-min image MSE; stops a fit early once hit
    stop_mse: float = 0.0
    student_width: int = 100
    init_a_std: float = 0.01

    def __post_init__(self):
        for name in ("inner_iters", "max_outer", "student_width"):
            if int(getattr(self, name)) < 0:
                raise ValueError(f"{name} must be nonnegative")
        for name in ("lr", "rho0", "rho_growth"):
            if float(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.lam < 0 or self.tol < 0:
            raise ValueError("lam and tol must be nonnegative")
        self.phases()

    def phases(self):
        """List of (iterations, learning rate) phases."""
        if not self.lr_schedule:
            return [(int(self.inner_iters), float(self.lr))]
        out = []
        for part in self.lr_schedule.split(","):
            n, lr = part.split(":")
            out.append((int(n), float(lr)))
        return out

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name: f.type for f in fields(cls)}
        kw = {}
        for key, raw in mapping.items():
            if key not in known:
                raise KeyError(f"unknown training key {key!r}")
            kw[key] = known[key](raw)
        return cls(**kw)

    @classmethod
    def from_file(cls, path, section="train"):
        """Read ``key = value`` lines (optionally under a ``[train]`` header)."""
        with open(path) as fh:
            text = fh.read()
        cp = configparser.ConfigParser()
        if not text.lstrip().startswith("["):
            text = f"[{section}]\n" + text
        cp.read_string(text)
        return cls.from_mapping(dict(cp[section]) if cp.has_section(section) else {})


@dataclass
class FitReport:
    params: InrParams
    loss: np.ndarray
    constraint: np.ndarray
    mse: np.ndarray
    best_mse: float
    wall_time: float
    outer_constraint: np.ndarray = field(default_factory=lambda: np.zeros(0))
    diverged: bool = False
    message: str = ""

    @property
    def iterations(self):
        return self.loss.shape[0]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["iter", "loss", "constraint_norm", "mse"])
            for i, row in enumerate(zip(self.loss, self.constraint, self.mse)):
                wr.writerow([i] + [repr(float(v)) for v in row])


class Objective:
    """Penalized or augmented-Lagrangian objective on the grid operator.

    value(theta) = Re<nu, c> + rho/2 |c|^2 + lam R(theta),  c = F_Omega f_theta - y.

    With nu = 0 and rho = 1 this is the penalized least-squares loss.
    Parameters are flat vectors [a, vec(w)]; all coefficient vectors are
    half boxes (see :class:`~.forward_op.GridOperator`).
    """

    def __init__(self, fm, y, reg, cfg, lam=0.0, rho=1.0, nu=None):
        if cfg.backend != "grid":
            raise ValueError("training runs on the grid backend")
        self.fm, self.reg, self.cfg = fm, reg, cfg
        self.op = cfg.operator(fm)
        yv = y.vals if hasattr(y, "vals") else np.asarray(y, dtype=complex)
        self.y = self.op.from_full(yv)
        self.lam, self.rho = float(lam), float(rho)
        self.nu = np.zeros_like(self.y) if nu is None else np.asarray(nu, dtype=complex)
        self.last = None

    def split(self, theta):
        W = theta.shape[0] // (self.fm.D + 1)
        return theta[:W], theta[W:].reshape(W, self.fm.D)

    def residual(self, theta):
        a, w = self.split(theta)
        V = self.op.unit_half(w)
        return a @ V - self.y

    def __call__(self, theta):
        op = self.op
        a, w = self.split(theta)
        T = op.tau(w)
        # float mask; multiplying by it is much cheaper than np.where with a scalar
        act = (T > 0).astype(float)
        V = op.analyze(np.maximum(T, 0.0))
        c = a @ V - self.y
        cn2 = float(op.sqnorm(c))
        data = float(op.inner(self.nu, c)) + 0.5 * self.rho * cn2
        r = self.nu + self.rho * c
        ga = op.inner(r[None, :], V)
        lam = self.lam
        if self.reg.kind == "modified":
            eta2 = op.sqnorm(V)
            reg = 0.5 * float(a @ a + eta2.sum())
            gw = a[:, None] * op.masked_moments(act, op.synth(r))
            if lam:
                gw = gw + lam * op.moments(act * op.synth(V))
        else:
            reg = 0.5 * float(a @ a + np.sum(w * w))
            gw = a[:, None] * op.masked_moments(act, op.synth(r)) + lam * w
        ga = ga + lam * a
        self.last = {"constraint": np.sqrt(cn2), "reg": reg, "c": c}
        return data + lam * reg, np.concatenate([ga, gw.ravel()])


def loss_and_grad(theta, y, reg, lam, cfg):
    """1/2 |F_Omega f_theta - y|^2 + lam R(theta) and its gradient as :class:`InrParams`."""
    obj = Objective(theta.fm, y, reg, cfg, lam=lam)
    val, g = obj(theta.flat())
    return val, InrParams.from_flat(theta.fm, g)


class MseMonitor:
    """Image-domain MSE of the student against reference values on an M^d grid.

    When the training grid is an integer multiple of the monitor grid, the
    student values are read off the pre-activations already on the training
    grid through a strided subsample.
    """

    def __init__(self, fm, reference, M, op=None):
        self.fm, self.M = fm, M
        self.reference = np.asarray(reference, dtype=float).reshape(-1)
        from .forward_op import grid_operator
        if op is not None and op.M % M == 0:
            self.op = op
            step = op.M // M
            idx = np.arange(0, op.M, step)
            self.sub = np.ravel_multi_index(np.meshgrid(*[idx] * fm.dim, indexing="ij"), (op.M,) * fm.dim).reshape(-1)
        else:
            self.op = grid_operator(fm, 0, M) if M > 2 * fm.K0 else None
            self.sub = None
        if self.op is None:
            raise ValueError("monitor grid too coarse for the feature map")

    def __call__(self, theta):
        W = theta.shape[0] // (self.fm.D + 1)
        a, w = theta[:W], theta[W:].reshape(W, self.fm.D)
        if self.sub is not None:
            T = w @ self.op._gamma_t[:, self.sub] if self.fm.dim == 1 else self.op.tau(w)[:, self.sub]
        else:
            T = self.op.tau(w)
        f = a @ np.maximum(T, 0.0)
        return float(np.mean((f - self.reference) ** 2))


def adam_fit(theta0, objective, config, monitor=None, monitor_every=1):
    """Run Adam on ``objective`` (flat theta -> (value, gradient)).

    ``theta0`` may be an :class:`InrParams` or a flat array; the returned
    report carries the same kind. The loss trace stores the objective at the
    iterate where each gradient was taken.
    """
    _keep_temporaries_on_heap()
    t0 = time.perf_counter()
    as_params = isinstance(theta0, InrParams)
    x = theta0.flat() if as_params else np.array(theta0, dtype=float)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    phases = config.phases()
    n = sum(k for k, _ in phases)
    loss = np.empty(n)
    cons = np.full(n, np.nan)
    mse = np.full(n, np.nan)
    best = np.inf
    it = 0
    stop = False
    for n_phase, lr in phases:
        for _ in range(n_phase):
            val, g = objective(x)
            if not np.isfinite(val) or not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite objective at Adam step {it}: value={val}")
            loss[it] = val
            last = getattr(objective, "last", None)
            if last is not None:
                cons[it] = last["constraint"]
            if monitor is not None and it % monitor_every == 0:
                mse[it] = monitor(x)
                best = min(best, mse[it])
                if config.stop_mse and best < config.stop_mse:
                    stop = True
            it += 1
            if stop:
                break
            m = ADAM_BETA1 * m + (1 - ADAM_BETA1) * g
            v = ADAM_BETA2 * v + (1 - ADAM_BETA2) * g * g
            mh = m / (1 - ADAM_BETA1 ** it)
            vh = v / (1 - ADAM_BETA2 ** it)
            x = x - lr * mh / (np.sqrt(vh) + ADAM_EPS)
        if stop:
            break
    if monitor is not None and not stop:
        best = min(best, monitor(x))
    out = InrParams.from_flat(theta0.fm, x) if as_params else x
    return FitReport(out, loss[:it], cons[:it], mse[:it], float(best), time.perf_counter() - t0,
                     message="stopped at MSE threshold" if stop else "")


def init_student(fm, width, seed, a_std=0.01):
    """Inner weights uniform on the sphere, outer weights N(0, a_std^2)."""
    rng = np.random.default_rng(seed)
    w = sample_sphere(rng, width, fm.D)
    a = a_std * rng.standard_normal(width)
    return InrParams(fm, a, w)


def al_solve(theta0, y, reg, cfg, config, monitor=None):
    """Augmented Lagrangian method for min R(theta) s.t. F_Omega f_theta = y.

    Each outer iteration minimizes

        L_rho(theta, nu) = R(theta) + Re<nu, c(theta)> + rho/2 |c(theta)|^2

    with a fresh Adam run, then updates nu <- nu + rho c and grows rho by
    ``rho_growth`` whenever |c| failed to shrink by a factor 4. The loop
    stops after ``max_outer`` iterations, when |c| < tol, or when the monitored
    MSE drops below ``config.stop_mse``. Divergence (|c| grew 10x over five
    outer iterations) is flagged in the report and logged, but the loop
    keeps going: with Adam's noisy final iterates a large rho can trip the
    test without the method actually failing.
    """
    t0 = time.perf_counter()
    fm = theta0.fm
    obj = Objective(fm, y, reg, cfg, lam=1.0, rho=config.rho0)
    x = theta0.flat()
    c = obj.residual(x)
    cnorm = float(np.sqrt(obj.op.sqnorm(c)))
    outer = [cnorm]
    losses, conss, mses = [], [], []
    best = monitor(x) if monitor is not None else np.inf
    _, g0 = obj(x)
    if cnorm < config.tol and not np.any(g0):
        return FitReport(theta0, np.zeros(0), np.zeros(0), np.zeros(0), best, time.perf_counter() - t0,
                         np.array(outer), message="initial point is feasible and stationary")
    diverged = False
    message = ""
    inner_cfg = replace(config)
    for k in range(config.max_outer):
        rep = adam_fit(x, obj, inner_cfg, monitor=monitor)
        x = rep.params
        losses.append(rep.loss)
        conss.append(rep.constraint)
        mses.append(rep.mse)
        best = min(best, rep.best_mse)
        c = obj.residual(x)
        new = float(np.sqrt(obj.op.sqnorm(c)))
        outer.append(new)
        if config.stop_mse and best < config.stop_mse:
            message = "; ".join(filter(None, [f"MSE threshold reached in outer iteration {k}", message]))
            break
        if new < config.tol:
            message = "; ".join(filter(None, [f"constraint tolerance reached in outer iteration {k}", message]))
            break
        obj.nu = obj.nu + obj.rho * c
        if new > 0.25 * cnorm:
            obj.rho *= config.rho_growth
        cnorm = new
        if not diverged and len(outer) > 5 and outer[-1] > 10 * outer[-6]:
            diverged = True
            message = f"constraint norm grew from {outer[-6]:.3e} to {outer[-1]:.3e} over five outer iterations"
            logger.warning("augmented Lagrangian diverging: %s", message)
    cat = lambda parts: np.concatenate(parts) if parts else np.zeros(0)
    return FitReport(InrParams.from_flat(fm, x), cat(losses), cat(conss), cat(mses), float(best),
                     time.perf_counter() - t0, np.array(outer), diverged, message)


def penalized_fit(theta0, y, reg, cfg, config, monitor=None, monitor_every=1):
    """Adam on 1/2 |F_Omega f_theta - y|^2 + lam R(theta) with ``config.lam``."""
    obj = Objective(theta0.fm, y, reg, cfg, lam=config.lam)
    return adam_fit(theta0, obj, config, monitor=monitor, monitor_every=monitor_every)
