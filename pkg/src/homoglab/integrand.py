"""Convex densities with p-growth or degenerate weighted growth.

All supported forms are weighted p-th powers of the gradient norm,
V = (w/p) |F|^p, where the weight w combines the random coefficient field,
an optional independent degenerate weight field, and an optional smooth
deterministic modulation of the macroscopic position.  This keeps the
gradient w |F|^{p-2} F analytic and makes p = 2 the standard quadratic form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .medium import (
    TAG_LAMBDA,
    EnsembleSpec,
    Realization,
    derived_realization,
    eval_coefficient,
    mix_seed,
)

__all__ = [
    "IntegrandSpec",
    "GrowthReport",
    "MomentEstimate",
    "evaluate_density",
    "density_gradient",
    "verify_growth",
    "moment_estimate",
    "FORM_P_DIRICHLET",
    "FORM_QUADRATIC",
    "FORM_DEGENERATE",
]

FORM_P_DIRICHLET = "weighted-p-dirichlet"
FORM_QUADRATIC = "two-phase-quadratic"
FORM_DEGENERATE = "degenerate-weighted"
_FORMS = (FORM_P_DIRICHLET, FORM_QUADRATIC, FORM_DEGENERATE)


@dataclass(frozen=True)
class IntegrandSpec:
    """Convex density (w/p)|F|^p with weight w = a * [lambda] * [m(x)].

    The a-field comes from the realization passed at evaluation time; the
    degenerate weight field (form degenerate-weighted) is an independent
    companion field derived deterministically from that realization's seed.
    modulation, when given, must be smooth and bounded away from 0 on the
    closed unit box.
    """

    p: float
    form: str = FORM_P_DIRICHLET
    lambda_cells: EnsembleSpec | None = None
    modulation: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if not (1.5 <= self.p <= 4.0):
            raise ValueError("exponent p must lie in [1.5, 4]")
        if self.form not in _FORMS:
            raise ValueError(f"unknown integrand form {self.form!r}")
        if self.form == FORM_QUADRATIC and self.p != 2.0:
            raise ValueError("two-phase-quadratic requires p = 2")
        if self.form == FORM_DEGENERATE and self.lambda_cells is None:
            raise ValueError("degenerate-weighted form needs a lambda ensemble")

    @property
    def degenerate(self) -> bool:
        return self.form == FORM_DEGENERATE


def lambda_field(spec: IntegrandSpec, r: Realization) -> Realization:
    """The degenerate weight realization paired with the a-field realization."""
    if spec.lambda_cells is None:
        raise ValueError("integrand has no lambda ensemble")
    return derived_realization(r, spec.lambda_cells, TAG_LAMBDA)


def combined_weight(spec: IntegrandSpec, r: Realization, x: np.ndarray) -> np.ndarray:
    """Pointwise weight w(x) so that V = (w/p)|F|^p, shape (..., d) -> (...)."""
    w = np.asarray(eval_coefficient(r, x), dtype=float)
    if spec.degenerate:
        w = w * eval_coefficient(lambda_field(spec, r), x)
    if spec.modulation is not None:
        w = w * spec.modulation(np.asarray(x, dtype=float))
    return w


def _norms(F: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.atleast_2d(F) if F.ndim == 1 else F, axis=-1)


def evaluate_density(
    spec: IntegrandSpec, r: Realization, x: np.ndarray, F: np.ndarray
) -> np.ndarray | float:
    """Density value(s) at macroscopic point(s) x and gradient(s) F."""
    x = np.asarray(x, dtype=float)
    F = np.asarray(F, dtype=float)
    scalar = F.ndim == 1
    w = combined_weight(spec, r, x)
    n = np.linalg.norm(F, axis=-1)
    out = (w / spec.p) * n**spec.p
    return float(out) if scalar else out


def density_gradient(
    spec: IntegrandSpec, r: Realization, x: np.ndarray, F: np.ndarray
) -> np.ndarray:
    """dV/dF = w |F|^{p-2} F, with the minimal-norm subgradient 0 at F = 0."""
    x = np.asarray(x, dtype=float)
    F = np.asarray(F, dtype=float)
    w = np.asarray(combined_weight(spec, r, x), dtype=float)
    n = np.linalg.norm(F, axis=-1)
    scale = np.zeros_like(n)
    nz = n > 0
    scale[nz] = w[nz] * n[nz] ** (spec.p - 2.0)
    return scale[..., None] * F


@dataclass(frozen=True)
class GrowthReport:
    """Tightest empirical constants for the two-sided p-growth bound.

    Bounds are against the p-normalized template
        (1/C)(|F|^p / p) - C <= V <= C (|F|^p / p + 1).
    satisfies_growth is False for degenerate-weighted integrands regardless of
    the sampled constants: weights near zero break the uniform lower bound.
    """

    c_low: float
    c_high: float
    n_samples: int
    bound: float
    passed: bool
    satisfies_growth: bool


def verify_growth(
    spec: IntegrandSpec, ensemble: EnsembleSpec, n: int, bound: float = 100.0
) -> GrowthReport:
    """Sample (realization, x, F) triples and fit the growth constants.

    |F| is log-uniform in [1e-2, 1e2]; directions uniform on the sphere.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(mix_seed(ensemble.seed, 0x47524F57))
    d = ensemble.dimension
    x = rng.uniform(0.0, 1.0, size=(n, d))
    mag = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), size=n))
    dirs = rng.normal(size=(n, d))
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    F = mag[:, None] * dirs

    from .medium import sample_realization

    idx = rng.integers(0, 2**31, size=n)
    vals = np.empty(n)
    for i in range(n):
        r = sample_realization(ensemble, int(idx[i]))
        vals[i] = evaluate_density(spec, r, x[i], F[i])

    t = mag**spec.p / spec.p
    c_high = float(np.max(vals / (t + 1.0)))
    # smallest C with (1/C) t - C <= V, per sample: positive root of C^2 + V C - t
    c_low = float(np.max(0.5 * (-vals + np.sqrt(vals**2 + 4.0 * t))))
    ok = not spec.degenerate
    return GrowthReport(
        c_low=c_low,
        c_high=c_high,
        n_samples=n,
        bound=bound,
        passed=ok and c_low <= bound and c_high <= bound,
        satisfies_growth=ok,
    )


@dataclass(frozen=True)
class MomentEstimate:
    """Monte Carlo estimate of <lambda^{-1/(p-1)}>^{p-1} with stability flag."""

    value: float
    stderr: float
    n_samples: int
    diverging: bool


def moment_estimate(lam_ensemble: EnsembleSpec, p: float, n: int) -> MomentEstimate:
    """Estimate the inverse-moment condition constant for a weight ensemble.

    The divergence flag is a diagnostic, not a proof: it fires when the
    running estimate moves more than 10% over the last doubling of n.
    """
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(mix_seed(lam_ensemble.seed, 0x4D4F4D54))
    lam = lam_ensemble.cells.from_unit(rng.uniform(size=n))
    z = lam ** (-1.0 / (p - 1.0))
    m = float(np.mean(z))
    value = m ** (p - 1.0)
    # delta method for the outer power
    sd = float(np.std(z, ddof=1)) / np.sqrt(n) if n > 1 else np.inf
    stderr = abs((p - 1.0) * m ** (p - 2.0)) * sd
    # scan the last three doublings: a heavy tail keeps kicking the mean around
    diverging = False
    prev = None
    for k in (8, 4, 2, 1):
        if n // k < 2:
            continue
        est = float(np.mean(z[: n // k])) ** (p - 1.0)
        if prev is not None and abs(est - prev) > 0.10 * abs(est):
            diverging = True
        prev = est
    return MomentEstimate(value=value, stderr=stderr, n_samples=n, diverging=diverging)
