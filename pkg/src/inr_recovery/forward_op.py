"""
The measurement operator F_Omega applied to INRs and single rectified units.

Two backends are available: an oversampled-grid DFT (any dimension) and,
for d = 1, exact integration of tau(x) exp(-2 pi i k x) over the intervals
where tau > 0.

:class:`GridOperator` is the batched engine used by training and the
certificate code. It only stores the half of each Hermitian coefficient
vector with first frequency coordinate k_1 >= 0; the remaining entries are
conjugates and are accounted for by a weight of 2 on k_1 > 0.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .spectral import (
    SQRT2, FrequencySet, Measurements, TrigPoly, box_synthesis, full_box, weights_to_box,
)

DEFAULT_M = {1: 4096, 2: 512}


@dataclass(frozen=True)
class ForwardConfig:
    """Measurement set Omega plus how F_Omega is discretized.

    ``backend`` is ``"grid"`` (M-point rectangle rule per axis) or
    ``"analytic1d"``.
    """

    omega: FrequencySet
    backend: str = "grid"
    M: int = 0

    def __post_init__(self):
        if self.omega.kind != "box":
            raise ValueError("Omega must be a full box")
        if self.backend not in ("grid", "analytic1d"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.backend == "analytic1d" and self.omega.dim != 1:
            raise ValueError("analytic backend is one-dimensional")
        if self.M == 0:
            object.__setattr__(self, "M", DEFAULT_M.get(self.omega.dim, 128))

    @property
    def K(self):
        return self.omega.radius

    @property
    def dim(self):
        return self.omega.dim

    def check(self, fm):
        if fm.dim != self.dim:
            raise ValueError("feature map and Omega live in different dimensions")
        if self.backend == "grid" and (self.M <= 2 * self.K or self.M <= 2 * fm.K0):
            raise ValueError(f"grid M={self.M} must exceed 2K={2 * self.K} and 2K0={2 * fm.K0}")

    def operator(self, fm):
        self.check(fm)
        return grid_operator(fm, self.K, self.M)


def make_config(K, d=1, M=None, backend="grid"):
    return ForwardConfig(full_box(K, d), backend, M or 0)


@lru_cache(maxsize=32)
def grid_operator(fm, K, M):
    return GridOperator(fm, K, M)


def _half_matrices(K, M):
    k = np.arange(-K, K + 1)
    m = np.arange(M)
    ph = (np.outer(k, m) % M) / M
    full_a = np.exp(-2j * np.pi * ph) / M
    return full_a[K:], full_a, np.exp(2j * np.pi * ph[K:]).T, np.exp(2j * np.pi * ph).T


class _Plan2:
    """Two-axis transforms as batched matmuls, real/imag stacked where inputs are real."""

    def __init__(self, ah, af, sh, sf, M):
        self.M, self.n1, self.n2 = M, ah.shape[0], af.shape[0]
        self.ah = ah
        self.af_t = np.ascontiguousarray(af.T)
        self.af_ri = np.ascontiguousarray(np.concatenate([af.real.T, af.imag.T], axis=1))
        self.sf_t = np.ascontiguousarray(sf.T)
        self.sh_ri = np.ascontiguousarray(np.concatenate([sh.real, -sh.imag], axis=1))

    def analyze(self, g):
        lead, M, n2 = g.shape[:-1], self.M, self.n2
        if np.isrealobj(g):
            z = g.reshape(-1, M) @ self.af_ri
            Z = (z[:, :n2] + 1j * z[:, n2:]).reshape(-1, M, n2)
        else:
            Z = g.reshape(-1, M, M) @ self.af_t
        return (self.ah @ Z).reshape(lead + (self.n1 * n2,))

    def synth(self, c):
        lead = c.shape[:-1]
        Y = c.reshape(-1, self.n1, self.n2) @ self.sf_t
        out = self.sh_ri @ np.concatenate([Y.real, Y.imag], axis=1)
        return out.reshape(lead + (self.M * self.M,))


class GridOperator:
    """Batched rectangle-rule Fourier analysis of units on the M^d grid.

    Grid functions are flattened to length M^d (lexicographic grid order);
    coefficient vectors are flattened half boxes {k : k_1 >= 0, |k|_inf <= K}.
    """

    def __init__(self, fm, K, M):
        self.fm, self.K, self.M, self.d = fm, K, M, fm.dim
        d = self.d
        self.n_grid = M ** d
        self.half_shape = (K + 1,) + (2 * K + 1,) * (d - 1)
        self.n_half = int(np.prod(self.half_shape))
        self.n_full = (2 * K + 1) ** d
        ah, af, sh, sf = _half_matrices(K, M)
        self._an = [ah] + [af] * (d - 1)
        self._sy = [sh] + [sf] * (d - 1)
        wt = np.full(self.half_shape, 2.0)
        wt[0] = 1.0
        self.weights = wt.reshape(-1)

        # feature side (radius K0)
        K0 = fm.K0
        self.half0_shape = (K0 + 1,) + (2 * K0 + 1,) * (d - 1)
        ah0, af0, sh0, sf0 = _half_matrices(K0, M)
        self._an0 = [ah0] + [af0] * (d - 1)
        self._sy0 = [sh0] + [sf0] * (d - 1)
        wt0 = np.full(self.half0_shape, 2.0)
        wt0[0] = 1.0
        self._wt0 = wt0.reshape(-1)
        hs = fm.freqs.freqs
        shift = np.array([0] + [K0] * (d - 1))
        self._pos0 = np.ravel_multi_index(tuple((hs + shift).T), self.half0_shape) if len(hs) else np.zeros(0, int)
        # negatives of canonical tuples with k_1 = 0 also live in the half box
        neg_in = hs[:, 0] == 0 if len(hs) else np.zeros(0, bool)
        self._neg0_src = np.flatnonzero(neg_in)
        self._neg0 = (np.ravel_multi_index(tuple((-hs[neg_in] + shift).T), self.half0_shape)
                      if neg_in.any() else np.zeros(0, int))
        self._dc0 = int(np.ravel_multi_index(tuple(shift), self.half0_shape))
        if d == 1:
            # stacked real/imag analysis matrix: real gemm instead of complex upcast
            self._an_ri = np.ascontiguousarray(np.concatenate([ah.real, ah.imag]).T)
            self._sy_ri = np.ascontiguousarray(np.concatenate([sh.real.T, -sh.imag.T]))
            x = np.arange(M) / M
            ph = 2 * np.pi * np.outer(x, hs[:, 0])
            self._gamma = np.concatenate([np.ones((M, 1)), SQRT2 * np.cos(ph), SQRT2 * np.sin(ph)], axis=1)
            self._gamma_t = np.ascontiguousarray(self._gamma.T)
        if d == 2:
            self._m2 = _Plan2(ah, af, sh, sf, M)
            self._m2_0 = _Plan2(ah0, af0, sh0, sf0, M)
        # full-box layout of the half vector
        self._full_tail = self.n_full - self.n_half

    # -- separable transforms -------------------------------------------------
    def _sep(self, arr, mats, in_shape):
        lead = arr.shape[:-1]
        arr = arr.reshape(lead + in_shape)
        nl = len(lead)
        for ax, A in enumerate(mats):
            arr = np.moveaxis(np.tensordot(arr, A, axes=([nl + ax], [1])), -1, nl + ax)
        return arr.reshape(lead + (-1,))

    def analyze(self, g):
        """Half-box coefficients of grid functions g, shape (..., M^d) -> (..., n_half)."""
        g = np.asarray(g)
        if self.d == 1:
            if np.isrealobj(g):
                z = g @ self._an_ri
                n = self.K + 1
                return z[..., :n] + 1j * z[..., n:]
            return g @ self._an[0].T
        if self.d == 2:
            return self._m2.analyze(g)
        return self._sep(g, self._an, (self.M,) * self.d)

    def synth(self, c):
        """Real grid function sum_{k in Omega} c[k] exp(2 pi i k.x) from half coefficients."""
        c = np.asarray(c) * self.weights
        if self.d == 1:
            return np.concatenate([c.real, c.imag], axis=-1) @ self._sy_ri
        if self.d == 2:
            return self._m2.synth(c)
        return self._sep(c, self._sy, self.half_shape).real

    def inner(self, u, v):
        """Re <u, v> over the full box, computed from half vectors."""
        return np.sum(self.weights * (np.conj(u) * v).real, axis=-1)

    def sqnorm(self, u):
        return np.sum(self.weights * (u.real ** 2 + u.imag ** 2), axis=-1)

    def tau(self, w):
        """Pre-activations on the grid, (..., D) -> (..., M^d)."""
        w = np.asarray(w, dtype=float)
        if self.d == 1:
            return w @ self._gamma_t
        if self.d == 2:
            return self._m2_0.synth(self._w_to_half0(w) * self._wt0)
        return self._sep(self._w_to_half0(w) * self._wt0, self._sy0, self.half0_shape).real

    def moments(self, g):
        """Grid averages mean(g * gamma), (..., M^d) -> (..., D)."""
        g = np.asarray(g, dtype=float)
        if self.d == 1:
            return g @ self._gamma / self.M
        G = self._m2_0.analyze(g) if self.d == 2 else self._sep(g, self._an0, (self.M,) * self.d)
        Gp = G[..., self._pos0]
        return np.concatenate([G[..., self._dc0:self._dc0 + 1].real, SQRT2 * Gp.real, -SQRT2 * Gp.imag], axis=-1)

    def masked_moments(self, mask, g):
        """moments(mask * g) for a batch of masks (..., M^d) and one grid function g (M^d,)."""
        if self.d == 1:
            return mask @ (g[:, None] * self._gamma) / self.M
        return self.moments(mask * g)

    def _w_to_half0(self, w):
        p = self.fm.p
        out = np.zeros(w.shape[:-1] + (int(np.prod(self.half0_shape)),), dtype=complex)
        out[..., self._dc0] = w[..., 0]
        c = (w[..., 1:p + 1] - 1j * w[..., p + 1:]) / SQRT2
        out[..., self._pos0] = c
        if self._neg0.size:
            out[..., self._neg0] = np.conj(c[..., self._neg0_src])
        return out

    # -- units ------------------------------------------------------------
    def unit_half(self, w):
        """Half coefficients of [w.gamma]_+ for a batch of inner weights."""
        return self.analyze(np.maximum(self.tau(w), 0.0))

    def eta(self, w):
        """Modified weight-decay weighting |F_Omega [w.gamma]_+|_2."""
        return np.sqrt(self.sqnorm(self.unit_half(w)))

    def to_full(self, c):
        """Half vector(s) -> full lexicographic box vector(s)."""
        c = np.asarray(c)
        out = np.empty(c.shape[:-1] + (self.n_full,), dtype=complex)
        out[..., self._full_tail:] = c
        out[..., :self._full_tail] = np.conj(out[..., ::-1][..., :self._full_tail])
        return out

    def from_full(self, vals):
        return np.asarray(vals, dtype=complex)[..., self._full_tail:]

    def measurements(self, c):
        return Measurements(full_box(self.K, self.d), self.to_full(c))


# ---------------------------------------------------------------------------
# analytic backend (d = 1)

class TangentialZeroWarning(UserWarning):
    pass


def find_positive_intervals(tp, n_samples=4096, xtol=1e-15, report=None):
    """Maximal open intervals of [0, 1) on which the 1-D polynomial ``tp`` is positive.

    Intervals are returned as (start, end) pairs with 0 <= start < 1 and
    start < end <= start + 1; an interval wrapping past 1 has end > 1.
    Sign changes on a dense grid are refined with Brent's method. Grid
    points where |tau| < 1e-13 without a sign change are tangential zeros;
    they are appended to ``report`` (a list) if one is given and otherwise
    ignored, with the interval decided by the sign at the midpoint.
    """
    if tp.fm.dim != 1:
        raise ValueError("interval search is one-dimensional")
    x = np.arange(n_samples) / n_samples
    v = tp(x)
    pos = v > 0
    if report is not None:
        near = np.abs(v) < 1e-13
        nb = np.roll(pos, 1) == np.roll(pos, -1)
        for i in np.flatnonzero(near & nb):
            report.append(float(x[i]))
    if pos.all():
        return [(0.0, 1.0)]
    if not pos.any():
        return []

    f = lambda t: float(tp(np.array([t]))[0])
    roots = []
    nxt = np.roll(pos, -1)
    for i in np.flatnonzero(pos != nxt):
        lo, hi = x[i], x[i] + 1.0 / n_samples
        flo, fhi = f(lo), f(hi)
        if flo == 0.0:
            r = lo
        elif fhi == 0.0:
            r = hi
        else:
            r = brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
        roots.append((r, bool(nxt[i])))  # True: entering a positive region
    out = []
    n = len(roots)
    start_idx = next(j for j, (_, up) in enumerate(roots) if up)
    for j in range(n):
        r, up = roots[(start_idx + j) % n]
        if not up:
            continue
        r_end = roots[(start_idx + j + 1) % n][0]
        s = r % 1.0
        e = r_end if r_end > s else r_end + 1.0
        out.append((s, e))
    return out


def _interval_exp_integral(n, s, e):
    # int_s^e exp(2 pi i n x) dx for integer array n
    n = np.asarray(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (np.exp(2j * np.pi * n * e) - np.exp(2j * np.pi * n * s)) / (2j * np.pi * n)
    return np.where(n == 0, e - s, val)


def _analytic_unit(w, fm, K):
    tp = TrigPoly(fm, np.asarray(w, dtype=float))
    c = weights_to_box(tp.w, fm)  # coefficients of tau at l = -K0..K0
    ls = np.arange(-fm.K0, fm.K0 + 1)
    ks = np.arange(-K, K + 1)
    out = np.zeros(ks.size, dtype=complex)
    for s, e in find_positive_intervals(tp):
        n = ls[None, :] - ks[:, None]
        out += (_interval_exp_integral(n, s, e) * c[None, :]).sum(axis=1)
    return out


# ---------------------------------------------------------------------------
# spec-level operations

def unit_coeffs(w, fm, cfg):
    """F_Omega [w.gamma]_+ as :class:`Measurements`."""
    cfg.check(fm)
    if cfg.backend == "analytic1d":
        return Measurements(cfg.omega, _analytic_unit(w, fm, cfg.K))
    op = cfg.operator(fm)
    return op.measurements(op.unit_half(np.asarray(w, dtype=float)[None, :])[0])


def unit_coeffs_batch(ws, fm, cfg):
    """Full-box coefficients of many units, shape (n, |Omega|)."""
    cfg.check(fm)
    if cfg.backend == "analytic1d":
        return np.array([_analytic_unit(w, fm, cfg.K) for w in ws])
    op = cfg.operator(fm)
    return op.to_full(op.unit_half(np.asarray(ws, dtype=float)))


def inr_coeffs(params, cfg):
    """F_Omega f_theta = sum_i a_i F_Omega [w_i.gamma]_+."""
    V = unit_coeffs_batch(params.w, params.fm, cfg)
    return Measurements(cfg.omega, params.a @ V)


def zero_fill_synthesis(y, M, herm_tol=1e-10):
    """Evaluate sum_{k in Omega} y[k] exp(2 pi i k.x) on the M^d grid.

    Unmeasured frequencies are treated as zero. The input must be Hermitian
    (coefficients of a real function).
    """
    d, K = y.freqs.dim, y.freqs.radius
    if M <= 2 * K:
        raise ValueError(f"grid size M={M} must exceed 2K={2 * K}")
    scale = max(1.0, float(np.max(np.abs(y.vals), initial=0.0)))
    if y.hermitian_error() > herm_tol * scale:
        raise ValueError("zero-fill synthesis needs Hermitian coefficients")
    img = box_synthesis(y.as_box(), M, d)
    if np.max(np.abs(img.imag), initial=0.0) > herm_tol * scale * y.vals.size:
        raise ValueError("imaginary residue too large")
    return img.real
