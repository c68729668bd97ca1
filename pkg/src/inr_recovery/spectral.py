"""
Integer frequency sets, the Fourier-features map, trigonometric polynomials
and uniform-grid Fourier coefficient extraction on the periodic cell [0,1)^d.

Conventions
-----------
Frequency boxes are enumerated lexicographically over d-tuples, so the
negation k -> -k reverses the order and the zero tuple sits in the middle.
Half-space representatives keep the tuples whose first nonzero coordinate is
positive, in the same lexicographic order.

Fourier coefficients are

    fhat[k] = int_{[0,1]^d} f(x) exp(-2 pi i k.x) dx

and are approximated on the grid {m/M} by the rectangle rule, which is exact
for trigonometric polynomials of degree < M/2.
"""

import csv
import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class FrequencySet:
    """Ordered set of integer frequency tuples.

    Attributes
    ----------
    dim : int
        Spatial dimension d.
    radius : int
        Box radius K (``max |k|_inf``).
    kind : str
        ``"box"`` for the full box or ``"half"`` for half-space
        representatives of the nonzero tuples.
    freqs : ndarray of int, shape (n, dim)
    """

    dim: int
    radius: int
    kind: str
    freqs: np.ndarray = field(repr=False, compare=False)

    def __len__(self):
        return self.freqs.shape[0]

    def __eq__(self, other):
        if not isinstance(other, FrequencySet):
            return NotImplemented
        return (self.dim == other.dim and self.kind == other.kind
                and np.array_equal(self.freqs, other.freqs))

    def __hash__(self):
        return hash((self.dim, self.radius, self.kind))

    def dilate(self, n):
        """The dilated set n*Omega for a full box (radius scaled by n)."""
        if self.kind != "box":
            raise ValueError("dilation is defined for full boxes only")
        return full_box(n * self.radius, self.dim)

    def contains(self, other):
        mine = {tuple(k) for k in self.freqs}
        return all(tuple(k) in mine for k in other.freqs)

    @property
    def shape(self):
        """Array shape of the box, ``(2K+1,) * d``."""
        return (2 * self.radius + 1,) * self.dim


def _lex_box(K, d):
    rng = range(-K, K + 1)
    return np.array(list(itertools.product(rng, repeat=d)), dtype=np.int64).reshape(-1, d)


def full_box(K, d):
    """Full box {k in Z^d : |k|_inf <= K}, lexicographic order."""
    if K < 0 or d < 1:
        raise ValueError(f"need K >= 0 and d >= 1, got K={K}, d={d}")
    return FrequencySet(dim=d, radius=K, kind="box", freqs=_lex_box(K, d))


def _is_canonical(k):
    nz = np.flatnonzero(k)
    return nz.size > 0 and k[nz[0]] > 0


def half_space(K, d):
    """One representative of each +-pair of nonzero tuples in the box of radius K."""
    box = _lex_box(K, d)
    keep = np.array([_is_canonical(k) for k in box], dtype=bool)
    return FrequencySet(dim=d, radius=K, kind="half", freqs=box[keep].reshape(-1, d))


@dataclass(frozen=True)
class FeatureMap:
    """Fourier-features layer

        gamma(x) = [1, sqrt2 cos(2 pi k_j.x) ..., sqrt2 sin(2 pi k_j.x) ...]

    over the half-space representatives k_1..k_p of the box of radius K0.
    """

    K0: int
    dim: int

    @property
    def freqs(self):
        return half_space(self.K0, self.dim)

    @property
    def p(self):
        return ((2 * self.K0 + 1) ** self.dim - 1) // 2

    @property
    def D(self):
        return 2 * self.p + 1

    @property
    def box(self):
        return full_box(self.K0, self.dim)

    def __call__(self, x):
        return eval_gamma(self, x)


def build_feature_map(K0, d):
    if K0 < 0 or d < 1:
        raise ValueError(f"need K0 >= 0 and d >= 1, got K0={K0}, d={d}")
    return FeatureMap(K0=int(K0), dim=int(d))


def _as_points(x, d):
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim < 2 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != d:
        raise ValueError(f"points must have trailing dimension {d}, got shape {x.shape}")
    return x


def eval_gamma(fm, x):
    """Evaluate the feature map at points ``x`` of shape (..., d).

    For d = 1 a plain array of scalars is accepted as well. Returns an
    array of shape (..., D).
    """
    x = _as_points(x, fm.dim)
    # periodic wrap keeps the phase argument small
    x = x - np.floor(x)
    phase = 2 * np.pi * (x @ fm.freqs.freqs.T.astype(float))
    ones = np.ones(phase.shape[:-1] + (1,))
    return np.concatenate([ones, SQRT2 * np.cos(phase), SQRT2 * np.sin(phase)], axis=-1)


def _box_index_pairs(fm):
    """Flat lexicographic box indices of the half-space freqs and their negatives."""
    n = (2 * fm.K0 + 1) ** fm.dim
    box = _lex_box(fm.K0, fm.dim)
    pos = np.flatnonzero([_is_canonical(k) for k in box])
    return pos, n - 1 - pos, (n - 1) // 2


def weights_to_box(w, fm):
    """Complex box coefficients (radius K0) of tau = w.gamma.

    ``w`` has shape (..., D); the result has shape (..., (2K0+1)^d) in
    lexicographic order. The DC entry is w0 and the entry at k_j is
    (w1_j - i w2_j)/sqrt2, the entry at -k_j its conjugate.
    """
    w = np.asarray(w, dtype=float)
    p = fm.p
    pos, neg, dc = _box_index_pairs(fm)
    out = np.zeros(w.shape[:-1] + ((2 * fm.K0 + 1) ** fm.dim,), dtype=complex)
    out[..., dc] = w[..., 0]
    c = (w[..., 1:p + 1] - 1j * w[..., p + 1:]) / SQRT2
    out[..., pos] = c
    out[..., neg] = np.conj(c)
    return out


def box_to_feature_moments(G, fm):
    """Map box coefficients G[k] = mean(g exp(-2 pi i k.x)) to mean(g * gamma).

    This is the adjoint of :func:`weights_to_box` for real g; it turns the
    radius-K0 analysis of a real grid function into the vector of its
    grid-averaged products with each feature.
    """
    pos, _, dc = _box_index_pairs(fm)
    Gp = G[..., pos]
    return np.concatenate([G[..., dc:dc + 1].real, SQRT2 * Gp.real, -SQRT2 * Gp.imag], axis=-1)


@dataclass(frozen=True)
class TrigPoly:
    """Real trigonometric polynomial tau(x) = w.gamma(x)."""

    fm: FeatureMap
    w: np.ndarray

    @property
    def w0(self):
        return float(self.w[0])

    @property
    def w1(self):
        return self.w[1:self.fm.p + 1]

    @property
    def w2(self):
        return self.w[self.fm.p + 1:]

    def __call__(self, x):
        x = _as_points(x, self.fm.dim)
        phase = 2 * np.pi * (x @ self.fm.freqs.freqs.T.astype(float))
        return self.w0 + SQRT2 * (np.cos(phase) @ self.w1 + np.sin(phase) @ self.w2)

    def box_coeffs(self):
        return weights_to_box(self.w, self.fm)


@dataclass
class Measurements:
    """Complex Fourier coefficients indexed by a full-box :class:`FrequencySet`."""

    freqs: FrequencySet
    vals: np.ndarray

    def __post_init__(self):
        self.vals = np.asarray(self.vals, dtype=complex).reshape(-1)
        if self.vals.shape[0] != len(self.freqs):
            raise ValueError("one value per frequency required")

    def __len__(self):
        return self.vals.shape[0]

    def __getitem__(self, k):
        k = np.atleast_1d(np.asarray(k, dtype=np.int64))
        K = self.freqs.radius
        if self.freqs.kind != "box" or np.any(np.abs(k) > K):
            raise KeyError(tuple(k))
        idx = np.ravel_multi_index(tuple(k + K), self.freqs.shape)
        return self.vals[idx]

    def hermitian_error(self):
        """max |vals[-k] - conj(vals[k])| (box order is symmetric under negation)."""
        return float(np.max(np.abs(self.vals[::-1] - np.conj(self.vals)), initial=0.0))

    def norm(self):
        return float(np.linalg.norm(self.vals))

    def as_box(self):
        return self.vals.reshape(self.freqs.shape)

    def __add__(self, other):
        return Measurements(self.freqs, self.vals + other.vals)

    def __sub__(self, other):
        return Measurements(self.freqs, self.vals - other.vals)

    def __mul__(self, s):
        return Measurements(self.freqs, s * self.vals)

    __rmul__ = __mul__

    def to_csv(self, path):
        d = self.freqs.dim
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow([f"k{i + 1}" for i in range(d)] + ["re", "im"])
            for k, v in zip(self.freqs.freqs, self.vals):
                wr.writerow([int(c) for c in k] + [repr(float(v.real)), repr(float(v.imag))])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        d = len(rows[0]) - 2
        ks = np.array([[int(c) for c in r[:d]] for r in rows[1:]], dtype=np.int64).reshape(-1, d)
        vals = np.array([float(r[d]) + 1j * float(r[d + 1]) for r in rows[1:]])
        K = int(np.max(np.abs(ks))) if ks.size else 0
        fs = full_box(K, d)
        if not np.array_equal(fs.freqs, ks):
            raise ValueError(f"{path}: rows are not a lexicographic full box")
        return cls(fs, vals)


# ---------------------------------------------------------------------------
# uniform grids and DFTs

def grid_points(M, d):
    """Grid {m/M : m in {0..M-1}^d} as an array of shape (M,)*d + (d,)."""
    if M < 1:
        raise ValueError("M must be >= 1")
    axes = [np.arange(M) / M] * d
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def grid_samples(f, M, d):
    """Sample ``f`` on the left-endpoint grid; ``f`` maps (N, d) points to N values."""
    pts = grid_points(M, d).reshape(-1, d)
    vals = np.asarray(f(pts if d > 1 else pts[:, 0]), dtype=float)
    return vals.reshape((M,) * d)


@lru_cache(maxsize=64)
def _analysis_matrix(K, M):
    k = np.arange(-K, K + 1)
    m = np.arange(M)
    # integer product mod M keeps the phase exact for large M
    return np.exp(-2j * np.pi * ((np.outer(k, m) % M) / M)) / M


@lru_cache(maxsize=64)
def _synthesis_matrix(K, M):
    k = np.arange(-K, K + 1)
    m = np.arange(M)
    return np.exp(2j * np.pi * ((np.outer(m, k) % M) / M))


def _apply_per_axis(arr, mats, d):
    # contracts the last d axes of arr with one matrix each (matrix maps in -> out)
    lead = arr.ndim - d
    for ax, A in enumerate(mats):
        arr = np.moveaxis(np.tensordot(arr, A, axes=([lead + ax], [1])), -1, lead + ax)
    return arr


def box_analysis(samples, K, d):
    """Rectangle-rule coefficients on the box of radius K by direct summation.

    ``samples`` has shape (..., M, ..., M) with d trailing grid axes; the
    result has shape (..., 2K+1, ..., 2K+1).
    """
    M = samples.shape[-1]
    if M <= 2 * K:
        raise ValueError(f"grid size M={M} must exceed 2K={2 * K} to avoid wrap-around")
    A = _analysis_matrix(K, M)
    return _apply_per_axis(np.asarray(samples), [A] * d, d)


def box_synthesis(coeffs, M, d):
    """Evaluate sum_k c[k] exp(2 pi i k.x) on the M-grid; inverse of :func:`box_analysis`."""
    K = (coeffs.shape[-1] - 1) // 2
    S = _synthesis_matrix(K, M)
    return _apply_per_axis(np.asarray(coeffs), [S] * d, d)


def _fft_analysis(samples, K, d):
    M = samples.shape[-1]
    axes = tuple(range(samples.ndim - d, samples.ndim))
    F = np.fft.fftn(samples, axes=axes) / M ** d
    idx = np.arange(-K, K + 1) % M
    return F[(...,) + np.ix_(*([idx] * d))]


def dft_coeffs(samples, target):
    """Fourier coefficients on ``target`` from grid samples of shape (M,)*d.

    Uses an FFT when M is a power of two and direct summation otherwise.
    """
    samples = np.asarray(samples, dtype=float)
    d, K = target.dim, target.radius
    if target.kind != "box":
        raise ValueError("target must be a full box")
    if samples.ndim != d:
        raise ValueError(f"expected {d}-dimensional samples, got {samples.ndim}")
    M = samples.shape[0]
    if M <= 2 * K:
        raise ValueError(f"grid size M={M} must exceed 2K={2 * K} to avoid wrap-around")
    if M & (M - 1) == 0:
        c = _fft_analysis(samples, K, d)
    else:
        c = box_analysis(samples, K, d)
    return Measurements(target, c.reshape(-1))
