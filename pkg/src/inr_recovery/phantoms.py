"""
Continuous-domain test images with known Fourier coefficients, image
metrics and simple file output (PGM, raw float32, CSV curves).
"""

import csv
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.special import j1

from .forward_op import inr_coeffs
from .model import InrParams, eval_inr
from .spectral import Measurements, build_feature_map, grid_points


@dataclass(frozen=True)
class Disc:
    center: tuple
    radius: float
    amplitude: float


@dataclass(frozen=True)
class Phantom:
    """Ground-truth image: a teacher network or a sum of disc indicators."""

    kind: str
    dim: int
    teacher: InrParams = None
    discs: tuple = field(default=())

    def __post_init__(self):
        if self.kind == "teacher":
            if self.teacher is None:
                raise ValueError("teacher phantom needs parameters")
        elif self.kind == "discs":
            if self.dim != 2:
                raise ValueError("disc phantoms are two-dimensional")
            for dc in self.discs:
                c = np.asarray(dc.center, dtype=float)
                if dc.radius <= 0:
                    raise ValueError("disc radii must be positive")
                if np.any(c - dc.radius < 0) or np.any(c + dc.radius > 1):
                    raise ValueError(f"disc {dc} leaves the unit square")
        else:
            raise ValueError(f"unknown phantom kind {self.kind!r}")

    def __call__(self, x):
        if self.kind == "teacher":
            return eval_inr(self.teacher, x)
        x = np.asarray(x, dtype=float)
        x = x - np.floor(x)
        out = np.zeros(x.shape[:-1])
        for dc in self.discs:
            r2 = np.sum((x - np.asarray(dc.center)) ** 2, axis=-1)
            out += dc.amplitude * (r2 < dc.radius ** 2)
        return out


def teacher_phantom(params):
    return Phantom("teacher", params.fm.dim, teacher=params)


def disc_phantom(discs):
    return Phantom("discs", 2, discs=tuple(Disc(tuple(map(float, c)), float(r), float(a)) for c, r, a in discs))


def random_disc_phantom(n_discs, seed):
    """A large background disc with ``n_discs`` smaller discs of mixed sign inside it."""
    rng = np.random.default_rng(seed)
    discs = [((0.5, 0.5), 0.38, 1.0)]
    while len(discs) < n_discs + 1:
        r = rng.uniform(0.03, 0.12)
        rho = rng.uniform(0, 0.38 - r - 0.02)
        phi = rng.uniform(0, 2 * np.pi)
        c = (0.5 + rho * np.cos(phi), 0.5 + rho * np.sin(phi))
        discs.append((c, r, rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 0.5)))
    return disc_phantom(discs)


def disc_coeffs(discs, omega):
    """Exact Fourier coefficients of a sum of disc indicators on the unit torus.

    fhat[0] = sum a pi r^2 and fhat[k] = sum a exp(-2 pi i k.c) r J1(2 pi |k| r) / |k|.
    """
    k = omega.freqs.astype(float)
    kn = np.linalg.norm(k, axis=1)
    out = np.zeros(len(omega), dtype=complex)
    nz = kn > 0
    for dc in discs:
        c = np.asarray(dc.center, dtype=float)
        mag = np.full(kn.shape, np.pi * dc.radius ** 2)
        mag[nz] = dc.radius * j1(2 * np.pi * kn[nz] * dc.radius) / kn[nz]
        out += dc.amplitude * mag * np.exp(-2j * np.pi * (k @ c))
    return out


def phantom_coeffs(ph, omega, cfg=None):
    """F_Omega of a phantom: the forward operator for teachers, closed form for discs."""
    if ph.kind == "teacher":
        if cfg is None:
            raise ValueError("teacher phantoms need a forward config")
        if cfg.omega != omega:
            raise ValueError("cfg.omega must equal omega")
        return inr_coeffs(ph.teacher, cfg)
    return Measurements(omega, disc_coeffs(ph.discs, omega))


def _fejer_weights(K0, N, center, d):
    # weights w with w.gamma(x) = prod_axes Fejer_N(x - c) normalized to peak 1
    fm = build_feature_map(K0, d)
    ks = fm.freqs.freqs
    tri = np.clip(1 - np.abs(ks) / (N + 1), 0, None).prod(axis=1)
    # Fejer_N(t)/(N+1) = sum_{|k|<=N} (1 - |k|/(N+1)) e^{2 pi i k t} / (N+1)
    h = tri / (N + 1) ** d
    ph = 2 * np.pi * (ks @ np.asarray(center, dtype=float))
    w1 = np.sqrt(2.0) * h * np.cos(ph)
    w2 = np.sqrt(2.0) * h * np.sin(ph)
    return fm, np.concatenate([[1.0 / (N + 1) ** d], w1, w2])


def dot_phantom(n_dots, K0, seed, d=2):
    """Width-``n_dots`` teacher whose units are rectified, radially peaked bumps.

    Each unit is [h(x - c) - t]_+ with h a tensor-product Fejer kernel of
    random order N in [ceil(K0/2), K0] normalized to peak value 1, c a random
    center and t a random threshold in (0.2, 0.6), above the kernel side
    lobes so the positive region is a single neighborhood of c. Units are
    returned on the unit sphere with positive outer weights.
    """
    if d != 2:
        raise ValueError("the dot phantom is two-dimensional")
    fm = build_feature_map(K0, d)
    rng = np.random.default_rng(seed)
    if n_dots == 0:
        return Phantom("teacher", d, teacher=InrParams(fm, [0.0], np.zeros((1, fm.D))))
    ws, amps = [], []
    for _ in range(n_dots):
        N = int(rng.integers((K0 + 1) // 2, K0 + 1))
        c = rng.uniform(0.1, 0.9, size=d)
        t = rng.uniform(0.2, 0.6)
        _, w = _fejer_weights(K0, N, c, d)
        w[0] -= t
        nrm = np.linalg.norm(w)
        ws.append(w / nrm)
        amps.append(rng.uniform(0.5, 1.5) * nrm)
    return Phantom("teacher", d, teacher=InrParams(fm, np.array(amps), np.array(ws)))


@dataclass(frozen=True)
class Metrics:
    mse: float
    max_abs_err: float
    M: int


def _grid_values(f, M, d):
    if callable(f):
        pts = grid_points(M, d).reshape(-1, d)
        return np.asarray(f(pts if d > 1 else pts[:, 0]), dtype=float).reshape((M,) * d)
    return np.asarray(f, dtype=float)


def image_mse(f_true, f_est, M, d=2):
    """Mean squared difference on the M^d grid; arguments are callables or grid arrays."""
    a = _grid_values(f_true, M, d)
    b = _grid_values(f_est, M, d)
    diff = a - b
    return Metrics(float(np.mean(diff ** 2)), float(np.max(np.abs(diff))), M)


def write_pgm(img, path):
    """8-bit binary PGM with min-max scaling; returns (lo, hi)."""
    img = np.asarray(img, dtype=float)
    lo, hi = float(img.min()), float(img.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    px = np.round((img - lo) * scale).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(px.tobytes())
    return lo, hi


def read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    # exactly one whitespace byte separates the header from the pixels
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise ValueError(f"{path}: not a binary PGM")
    w, h = int(m.group(1)), int(m.group(2))
    return np.frombuffer(data[m.end(): m.end() + w * h], dtype=np.uint8).reshape(h, w)


def write_raw(img, path):
    """Little-endian float32 grid plus a text header ``path + '.hdr'``."""
    img = np.asarray(img)
    img.astype("<f4").tofile(path)
    with open(str(path) + ".hdr", "w") as fh:
        fh.write(f"d = {img.ndim}\nM = {img.shape[0]}\ndtype = float32-le\n")


def read_raw(path):
    hdr = {}
    with open(str(path) + ".hdr") as fh:
        for line in fh:
            k, v = line.split("=")
            hdr[k.strip()] = v.strip()
    d, M = int(hdr["d"]), int(hdr["M"])
    return np.fromfile(path, dtype="<f4").reshape((M,) * d)


def render_image(f, M, path, d=2):
    """Render a callable or grid array on the M^d grid.

    d = 2 writes ``path.pgm`` (with normalization constants in
    ``path.pgm.txt``) and ``path.raw`` (+ ``.hdr``); d = 1 writes a CSV
    curve ``path.csv`` with columns x, f.
    """
    if d > 2:
        raise ValueError("rendering supports d <= 2")
    img = _grid_values(f, M, d)
    path = str(path)
    if d == 1:
        with open(path + ".csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "f"])
            for m, v in enumerate(img):
                wr.writerow([repr(m / M), repr(float(v))])
        return img
    lo, hi = write_pgm(img, path + ".pgm")
    with open(path + ".pgm.txt", "w") as fh:
        fh.write(f"min = {lo!r}\nmax = {hi!r}\n")
    write_raw(img, path + ".raw")
    return img
