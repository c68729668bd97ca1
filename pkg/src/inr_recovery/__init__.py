"""Recovery of periodic signals from low-pass Fourier samples with shallow ReLU INRs."""

from .certificate import (
    AtomicMeasure, DualCertificate, FeasibilityReport, apply_K, certificate_width1_modified,
    duality_gap_estimate, tv_norm, verify_certificate,
)
from .forward_op import ForwardConfig, find_positive_intervals, inr_coeffs, make_config, unit_coeffs, zero_fill_synthesis
from .model import InrParams, eval_inr, normalize_to_sphere, random_teacher, rebalance
from .phantoms import Metrics, Phantom, disc_phantom, dot_phantom, image_mse, phantom_coeffs, render_image
from .spectral import FeatureMap, FrequencySet, Measurements, TrigPoly, build_feature_map, dft_coeffs, full_box
from .training import Regularizer, TrainConfig, al_solve, init_student, loss_and_grad, penalized_fit, reg_value

__version__ = "0.1.0"
