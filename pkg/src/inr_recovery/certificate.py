"""
Atomic measures over the weight sphere, the weighted TV norm, the operator
K_Omega and numerical dual certificates.

The measure-space problem

    min ||mu||_{TV,eta}  s.t.  K_Omega mu = y

has the dual

    max Re<q, y>  s.t.  |Re<q, v(w)>| <= eta(w) for all unit w,

with v(w) = F_Omega [w.gamma]_+. The constraint is semi-infinite, so it is
checked by dense random sampling of the sphere followed by projected
gradient ascent on the worst directions.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .forward_op import unit_coeffs_batch
from .model import InrParams, normalize_to_sphere, sample_sphere
from .spectral import Measurements


@dataclass(frozen=True)
class AtomicMeasure:
    """mu = sum_i a_i delta_{w_i} with unit-norm atoms w_i."""

    fm: object
    a: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float).reshape(-1)
        w = np.array(self.w, dtype=float).reshape(a.shape[0], self.fm.D)
        if a.size and np.any(np.abs(np.linalg.norm(w, axis=1) - 1.0) > 1e-12):
            raise ValueError("atoms must lie on the unit sphere")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "w", w)

    def __len__(self):
        return self.a.shape[0]

    @classmethod
    def empty(cls, fm):
        return cls(fm, np.zeros(0), np.zeros((0, fm.D)))

    @classmethod
    def from_params(cls, params):
        p = normalize_to_sphere(params)
        keep = p.a != 0
        return cls(p.fm, p.a[keep], p.w[keep])

    def to_params(self):
        return InrParams(self.fm, self.a, self.w)

    def check_support(self, eta):
        """Raise unless every atom has eta(w) > 0 (membership in U_eta)."""
        if len(self) and np.any(eta(self.w) <= 0):
            raise ValueError("atom outside U_eta: eta(w) = 0")


def tv_norm(mu, eta):
    """Weighted TV norm sum_i |a_i| eta(w_i)."""
    if len(mu) == 0:
        return 0.0
    return float(np.abs(mu.a) @ eta(mu.w))


def apply_K(mu, cfg):
    """K_Omega mu = sum_i a_i F_Omega [w_i.gamma]_+."""
    if len(mu) == 0:
        return Measurements(cfg.omega, np.zeros(len(cfg.omega), dtype=complex))
    V = unit_coeffs_batch(mu.w, mu.fm, cfg)
    return Measurements(cfg.omega, mu.a @ V)


@dataclass
class FeasibilityReport:
    """Outcome of sampling the dual constraint |Re<q, v(w)>| / eta(w) <= 1."""

    max_ratio: float
    argmax: np.ndarray
    near_equality: np.ndarray
    ratios: np.ndarray = field(repr=False)
    directions: np.ndarray = field(repr=False)
    refined: np.ndarray = field(repr=False, default=None)
    n_skipped: int = 0

    def violated(self, tol=1e-8):
        return self.max_ratio > 1 + tol

    def summary(self):
        lines = [
            f"max_ratio = {self.max_ratio!r}",
            f"argmax = {' '.join(repr(float(v)) for v in self.argmax)}",
            f"n_samples = {self.ratios.size}",
            f"n_skipped = {self.n_skipped}",
            f"n_near_equality = {len(self.near_equality)}",
        ]
        return "\n".join(lines) + "\n"

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            D = self.directions.shape[1]
            wr.writerow(["sample", "ratio"] + [f"w{j}" for j in range(D)])
            for i, (r, w) in enumerate(zip(self.ratios, self.directions)):
                wr.writerow([i, repr(float(r))] + [repr(float(v)) for v in w])


@dataclass
class DualCertificate:
    q: Measurements
    kind: str
    report: FeasibilityReport = None

    def pairing(self, y):
        return float(np.real(np.vdot(self.q.vals, y.vals)))


def _pairing_and_eta(q, ws, fm, cfg, kind, batch=4096):
    op = cfg.operator(fm)
    qh = op.from_full(q.vals)
    num = np.empty(len(ws))
    eta = np.empty(len(ws))
    for s in range(0, len(ws), batch):
        V = op.unit_half(ws[s:s + batch])
        num[s:s + batch] = op.inner(qh[None, :], V)
        eta[s:s + batch] = np.sqrt(op.sqnorm(V)) if kind == "modified" else np.linalg.norm(ws[s:s + batch], axis=1)
    return num, eta


def _ratio_ascent(q, w, fm, cfg, kind, steps, step):
    """Projected gradient ascent of |Re<q, v(w)>| / eta(w) on the sphere, batched."""
    op = cfg.operator(fm)
    qh = op.from_full(q.vals)
    sq = op.synth(qh)
    w = w.copy()
    for _ in range(steps):
        T = op.tau(w)
        act = (T > 0).astype(float)
        V = op.analyze(T * act)
        num = op.inner(qh[None, :], V)
        gnum = op.masked_moments(act, sq)
        if kind == "modified":
            eta = np.sqrt(op.sqnorm(V))
            geta = op.moments(act * op.synth(V)) / np.maximum(eta, 1e-300)[:, None]
        else:
            eta = np.linalg.norm(w, axis=1)
            geta = w / eta[:, None]
        ok = eta > 1e-10
        safe = np.where(ok, eta, 1.0)
        g = (np.sign(num)[:, None] * gnum / safe[:, None]
             - (np.abs(num) / safe ** 2)[:, None] * geta)
        g = np.where(ok[:, None], g, 0.0)
        g -= np.sum(g * w, axis=1, keepdims=True) * w
        w = w + step * g
        w /= np.linalg.norm(w, axis=1, keepdims=True)
    num, eta = _pairing_and_eta(q, w, fm, cfg, kind)
    ratio = np.where(eta > 1e-10, np.abs(num) / np.where(eta > 1e-10, eta, 1.0), 0.0)
    return w, ratio


def verify_certificate(q, kind, fm, cfg, n_samples=100_000, refine_steps=200, seed=0,
                       step=1e-2, n_refine=10, near_tol=1e-6):
    """Spot-check dual feasibility of ``q`` on the unit sphere of R^D.

    Samples ``n_samples`` uniform directions, evaluates
    rho(w) = |Re<q, v(w)>| / eta(w) (skipping eta(w) < 1e-10), refines the
    ``n_refine`` largest ratios by projected gradient ascent and reports the
    maximum, its location and the near-equality set rho > 1 - near_tol.
    """
    rng = np.random.default_rng(seed)
    ws = sample_sphere(rng, n_samples, fm.D)
    num, eta = _pairing_and_eta(q, ws, fm, cfg, kind)
    skip = eta < 1e-10
    ratios = np.where(skip, 0.0, np.abs(num) / np.where(skip, 1.0, eta))
    top = np.argsort(-ratios, kind="stable")[:n_refine]
    if refine_steps and len(top):
        wr, rr = _ratio_ascent(q, ws[top], fm, cfg, kind, refine_steps, step)
    else:
        wr, rr = ws[top], ratios[top]
    all_w = np.concatenate([ws, wr])
    all_r = np.concatenate([ratios, rr])
    i = int(np.argmax(all_r))
    near = all_w[all_r > 1 - near_tol]
    return FeasibilityReport(float(all_r[i]), all_w[i], near, ratios, ws, wr, int(skip.sum()))


def certificate_width1_modified(w0, sign, fm, cfg):
    """Dual certificate for the width-1 measure a delta_{w0} under modified weight decay.

    q = sign * v(w0) / |v(w0)|. For modified weight decay eta(w) = |v(w)|,
    so |Re<q, v(w)>| <= eta(w) holds for every w by Cauchy-Schwarz, with
    equality at w0. ``sign`` must match the sign of the outer weight.
    """
    K, K0 = cfg.K, fm.K0
    if K < 3 * K0:
        raise ValueError(f"need Omega to contain 3*Omega_0: K={K} < 3*K0={3 * K0}")
    v0 = unit_coeffs_batch(np.asarray(w0, dtype=float)[None, :], fm, cfg)[0]
    eta0 = float(np.linalg.norm(v0))
    if eta0 == 0:
        raise ValueError("eta(w0) = 0: the unit is identically zero")
    return DualCertificate(Measurements(cfg.omega, np.sign(sign) * v0 / eta0), "modified")


def duality_gap_estimate(mu, q, y, eta, cfg, kind="modified", report=None, primal_tol=1e-10,
                         dual_tol=1e-8, **verify_kw):
    """Primal value ||mu||_{TV,eta} minus the dual value Re<q, y>.

    The pair must be feasible: K_Omega mu = y within ``primal_tol`` (relative
    to |y|, absolute when y = 0) and q must pass :func:`verify_certificate`
    with max ratio <= 1 + ``dual_tol``. Raises ``ValueError`` naming the
    violated condition otherwise. A gap near zero certifies that mu solves
    the measure-space problem.
    """
    qm = q.q if isinstance(q, DualCertificate) else q
    res = np.linalg.norm(apply_K(mu, cfg).vals - y.vals)
    if res > primal_tol * max(1.0, np.linalg.norm(y.vals)):
        raise ValueError(f"primal infeasible: |K mu - y| = {res:.3e}")
    if report is None and isinstance(q, DualCertificate):
        report = q.report
    if report is None:
        report = verify_certificate(qm, kind, mu.fm, cfg, **verify_kw)
    if report.violated(dual_tol):
        raise ValueError(f"dual infeasible: max ratio {report.max_ratio!r} exceeds 1 + {dual_tol}")
    return tv_norm(mu, eta) - float(np.real(np.vdot(qm.vals, y.vals)))
