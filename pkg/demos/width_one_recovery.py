"""
Recovering a single ReLU unit from six Fourier coefficients
===========================================================

A one-unit network f(x) = a [w . gamma(x)]_+ on the circle has a kink
wherever w . gamma crosses zero, so its spectrum never ends. We only see
the coefficients with |k| <= 6, and ask a wide student network to match
them while minimizing the modified weight decay. If the minimizer is
unique, the student has to rebuild the full signal, kinks included.
"""

# %%
# Setup: feature map with frequencies up to K0 = 2, measurements up to K = 6.
import numpy as np

from inr_recovery import (
    Regularizer, TrainConfig, al_solve, build_feature_map, eval_inr, init_student, inr_coeffs,
    make_config, random_teacher,
)
from inr_recovery.spectral import grid_samples
from inr_recovery.training import MseMonitor

fm = build_feature_map(2, 1)
cfg = make_config(6, 1, M=1024)
reg = Regularizer("modified", cfg)

teacher = random_teacher(1, fm, seed=3, eta=reg.weighting(fm))
y = inr_coeffs(teacher, cfg)
print(f"D = {fm.D} features, {len(y.vals)} measured coefficients")

# %%
# The student has 100 units and a tiny random output layer. The monitor
# tracks the image-domain error against the (hidden) teacher on 1024 points.
ref = grid_samples(lambda x: eval_inr(teacher, x), 1024, 1)
monitor = MseMonitor(fm, ref, 1024, cfg.operator(fm))
student = init_student(fm, 100, seed=11)

conf = TrainConfig(inner_iters=2000, lr=1e-3, max_outer=20, stop_mse=1e-9)
report = al_solve(student, y, reg, cfg, conf, monitor=monitor)
print(report.message or "outer iteration budget used")
print(f"best image MSE {report.best_mse:.2e} after {report.iterations} Adam steps")

# %%
# Measurement misfit per outer iteration of the augmented Lagrangian.
for k, c in enumerate(report.outer_constraint):
    print(f"outer {k:2d}  |F f - y| = {c:.2e}")

# %%
# Most student units collapse onto the teacher. Their weights shrink to zero
# or line up with w0 after normalization to the unit sphere.
from inr_recovery import normalize_to_sphere

s = normalize_to_sphere(report.params)
w0 = teacher.w[0] / np.linalg.norm(teacher.w[0])
alive = np.abs(s.a) > 1e-3 * np.abs(s.a).max()
print(f"{alive.sum()} of {s.width} units carry weight;"
      f" min cosine to the teacher direction {np.min(s.w[alive] @ w0):.6f}")
