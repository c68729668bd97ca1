"""
Shallow ReLU INR with a Fourier-features input layer,

    f_theta(x) = sum_i a_i [w_i . gamma(x)]_+ ,

parameter containers, the sphere normalization, the l2 -> weighted-l1
rebalancing transform and random teacher networks.
"""

from dataclasses import dataclass

import numpy as np

from .spectral import FeatureMap, build_feature_map, eval_gamma, grid_points


@dataclass(frozen=True)
class InrParams:
    """Width-W parameters theta = {(a_i, w_i)}.

    Attributes
    ----------
    fm : FeatureMap
    a : ndarray, shape (W,)
        Outer weights.
    w : ndarray, shape (W, D)
        Inner weights acting on the features.
    """

    fm: FeatureMap
    a: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float).reshape(-1)
        w = np.array(self.w, dtype=float).reshape(a.shape[0], -1)
        if a.shape[0] < 1:
            raise ValueError("width must be >= 1")
        if w.shape[1] != self.fm.D:
            raise ValueError(f"inner weights need length D={self.fm.D}, got {w.shape[1]}")
        a.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "w", w)

    @property
    def width(self):
        return self.a.shape[0]

    @property
    def units(self):
        return list(zip(self.a, self.w))

    def __call__(self, x):
        return eval_inr(self, x)

    def flat(self):
        """Flat parameter vector [a, vec(w)] used by the optimizers."""
        return np.concatenate([self.a, self.w.ravel()])

    @classmethod
    def from_flat(cls, fm, theta):
        theta = np.asarray(theta, dtype=float)
        W = theta.shape[0] // (fm.D + 1)
        return cls(fm, theta[:W], theta[W:].reshape(W, fm.D))

    def is_normalized(self, tol=1e-12):
        return bool(np.all(np.abs(np.linalg.norm(self.w, axis=1) - 1.0) <= tol))

    # text record: header "d K0 W" then one row "a w_0 ... w_{D-1}" per unit
    def to_text(self):
        lines = [f"{self.fm.dim} {self.fm.K0} {self.width}"]
        for a, w in self.units:
            lines.append(" ".join(repr(float(v)) for v in (a, *w)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        rows = [r.split() for r in text.strip().splitlines() if r.strip()]
        d, K0, W = (int(v) for v in rows[0])
        body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
        if body.shape[0] != W:
            raise ValueError(f"header announces {W} units, found {body.shape[0]}")
        return cls(build_feature_map(K0, d), body[:, 0], body[:, 1:])


def unit_tau(params, x):
    """Pre-activations tau_i(x) = w_i . gamma(x), shape (..., W)."""
    return eval_gamma(params.fm, x) @ params.w.T


def eval_inr(params, x):
    """Evaluate f_theta at points ``x`` (shape (..., d), or scalars when d = 1)."""
    return np.maximum(unit_tau(params, x), 0.0) @ params.a


def normalize_to_sphere(params):
    """Move each inner-weight norm into the outer weight.

    ReLU is positively homogeneous, so (a, w) -> (a |w|, w / |w|) leaves
    f_theta unchanged. Units with w = 0 realize the zero function and become
    (0, 0).
    """
    norms = np.linalg.norm(params.w, axis=1)
    dead = norms == 0
    safe = np.where(dead, 1.0, norms)
    a = np.where(dead, 0.0, params.a * norms)
    w = np.where(dead[:, None], 0.0, params.w / safe[:, None])
    return InrParams(params.fm, a, w)


def rebalance(params, eta):
    """Rescale each unit so that |a_i| = eta(w_i) without changing f_theta.

    ``eta`` is a positively homogeneous weighting function evaluated on an
    array of inner weights of shape (W, D). After rebalancing, the
    generalized weight decay

        R(theta) = 1/2 sum_i (a_i^2 + eta(w_i)^2)

    equals sum_i |a_i| eta(w_i) of the input, which by AM-GM is the minimum
    of R over all rescalings of the units. Units with a_i = 0 are sent to
    (0, 0).

    Raises
    ------
    ValueError
        If a unit has a_i != 0 but eta(w_i) = 0.
    """
    e = np.asarray(eta(params.w), dtype=float)
    active = params.a != 0
    bad = active & (e <= 0)
    if np.any(bad):
        raise ValueError(f"units {np.flatnonzero(bad).tolist()} have a != 0 but zero weight eta(w)")
    absa = np.abs(params.a)
    safe_e = np.where(active, e, 1.0)
    a = np.where(active, np.sign(params.a) * np.sqrt(absa * safe_e), 0.0)
    scale = np.where(active, np.sqrt(absa / safe_e), 0.0)
    return InrParams(params.fm, a, params.w * scale[:, None])


def sample_sphere(rng, n, D):
    """n points uniform on the unit sphere of R^D."""
    g = rng.standard_normal((n, D))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _unit_is_zero(fm, w, M=None):
    # a degree-K0 trig polynomial that is <= 0 on a fine grid is treated as nonpositive
    if M is None:
        M = max(64, 32 * fm.K0) if fm.dim == 1 else max(16, 8 * fm.K0)
    pts = grid_points(M, fm.dim).reshape(-1, fm.dim)
    return np.max(eval_gamma(fm, pts) @ w) <= 0.0


def random_teacher(W, fm, seed, eta, max_redraws=1000):
    """Random width-W teacher network.

    Inner weights are uniform on the unit sphere, redrawn while the unit is
    identically zero or eta(w) <= 1e-8. Outer weights have a random sign and
    magnitude uniform on [0.5, 1.5].
    """
    rng = np.random.default_rng(seed)
    ws = []
    for _ in range(W):
        for _attempt in range(max_redraws):
            w = sample_sphere(rng, 1, fm.D)[0]
            if not _unit_is_zero(fm, w) and float(eta(w[None, :])[0]) > 1e-8:
                break
        else:
            raise RuntimeError(f"no admissible unit after {max_redraws} draws; weighting function degenerate")
        ws.append(w)
    signs = rng.choice([-1.0, 1.0], size=W)
    mags = rng.uniform(0.5, 1.5, size=W)
    return InrParams(fm, signs * mags, np.array(ws))
