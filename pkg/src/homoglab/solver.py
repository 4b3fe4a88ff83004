"""Assembly and minimization of oscillatory convex energies.

Covers the quenched single-realization energy, the sample-averaged energy
over several realizations, the variance-regularized coupled energy (penalty
on the deviation of each realization's gradient from the empirical mean
gradient), and the periodic cell problems that produce effective integrand
values and correctors on representative volumes.

p = 2 uncoupled problems go through a diagonally preconditioned conjugate
gradient on the assembled SPD system; everything else is minimized by
Polak-Ribiere nonlinear CG with Armijo backtracking on the reduced
(constrained) variables.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .integrand import IntegrandSpec, lambda_field
from .medium import EnsembleSpec, Realization, eval_coefficient, periodize, sample_realization
from .meshing import (
    DIRICHLET_ZERO,
    PERIODIC_MEAN_ZERO,
    Constraint,
    DiscreteField,
    Mesh,
    build_mesh,
)

__all__ = [
    "EnergyFunctional",
    "MinimizeResult",
    "CellResult",
    "EffectiveValue",
    "assemble_energy",
    "minimize",
    "minimize_coupled",
    "cell_problem",
    "effective_integrand",
]

Load = float | Callable[[np.ndarray], np.ndarray] | None


def random_weight(spec: IntegrandSpec, r: Realization, pts: np.ndarray) -> np.ndarray:
    """Random part of the density weight (a-field times degenerate weight)."""
    w = np.asarray(eval_coefficient(r, pts), dtype=float)
    if spec.degenerate:
        w = w * eval_coefficient(lambda_field(spec, r), pts)
    return w


@dataclass
class EnergyFunctional:
    """Discretized energy, ready for minimization.

    coef[i, e] holds the density weight of realization i at element e:
    the random field sampled at barycenter/eps times the deterministic
    modulation at the barycenter.  delta > 0 with coupled=True adds the
    empirical-variance penalty; with a "corrector" penalty (cell problems)
    it penalizes each gradient individually, see `_Objective`.
    """

    realizations: list[Realization]
    weights: np.ndarray
    eps: float
    mesh: Mesh
    integrand: IntegrandSpec
    coef: np.ndarray
    load_values: np.ndarray
    delta: float
    coupled: bool
    constraint: str = DIRICHLET_ZERO
    gradient_offset: np.ndarray | None = None
    penalty: str = "variance"
    scale: float = 1.0

    @property
    def n_realizations(self) -> int:
        return len(self.realizations)


def assemble_energy(
    realizations: Sequence[Realization],
    eps: float,
    mesh: Mesh,
    integrand: IntegrandSpec,
    load: Load = None,
    delta: float = 0.0,
    coupled: bool | None = None,
    weights: Sequence[float] | None = None,
) -> EnergyFunctional:
    """Build the sample-averaged oscillatory energy on the given mesh.

    The random coefficient is sampled at tau_{x_e/eps}, one point per element
    barycenter x_e; the load and modulation stay at macroscopic coordinates.
    """
    realizations = list(realizations)
    if not realizations:
        raise ValueError("need at least one realization")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if coupled is None:
        coupled = delta > 0 and len(realizations) > 1
    if coupled and delta > 0 and len(realizations) < 2:
        raise ValueError("variance coupling needs at least 2 realizations")
    if mesh.h > eps / 4 + 1e-12:
        warnings.warn(f"mesh h={mesh.h:g} does not resolve eps={eps:g} (want h <= eps/4)")
    if weights is None:
        w = np.full(len(realizations), 1.0 / len(realizations))
    else:
        w = np.asarray(weights, dtype=float)
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
    bary = mesh.barycenters
    coef = np.stack([random_weight(integrand, r, bary / eps) for r in realizations])
    if integrand.modulation is not None:
        coef = coef * integrand.modulation(bary)
    if load is None:
        f_e = np.zeros(mesh.n_elements)
    elif callable(load):
        f_e = np.asarray(load(bary), dtype=float) * np.ones(mesh.n_elements)
    else:
        f_e = np.full(mesh.n_elements, float(load))
    return EnergyFunctional(
        realizations=realizations,
        weights=w,
        eps=eps,
        mesh=mesh,
        integrand=integrand,
        coef=coef,
        load_values=f_e,
        delta=delta,
        coupled=coupled,
    )


@dataclass
class MinimizeResult:
    fields: list[DiscreteField]
    mean_field: DiscreteField | None
    energy: float
    iterations: int
    grad_norm: float
    wall_ms: float
    converged: bool
    method: str


class _Objective:
    """Value and gradient of the reduced energy.

    Variables are the stacked reduced dofs of all N fields.  Element
    gradients optionally get a constant offset (cell problems); penalties:
    "variance" couples realizations through the empirical mean gradient,
    "corrector" penalizes each gradient norm individually.
    """

    def __init__(self, E: EnergyFunctional):
        self.E = E
        self.mesh = E.mesh
        self.constraint = Constraint(E.mesh, E.constraint)
        self.N = E.n_realizations
        self.G = E.mesh.gradient_matrix()
        self.M = E.mesh.barycenter_matrix()
        self.vol = E.mesh.volumes
        self.d = E.mesh.dimension
        self.p = E.integrand.p
        # load vector in reduced coordinates, one per realization (shared)
        self.load_red = self.constraint.reduce_adjoint(self.M.T @ (self.vol * E.load_values))
        self.n_dofs = self.constraint.n_dofs

    def precond_diag(self) -> np.ndarray:
        """Diagonal of the p=2-type Hessian surrogate for the stacked system."""
        E = self.E
        B, G, vol = self.constraint.matrix, self.G, self.vol
        pen = 0.0
        if E.delta > 0:
            pen = 2.0 * E.delta * (1.0 - 1.0 / self.N if E.penalty == "variance" else 1.0)
        out = np.empty((self.N, self.n_dofs))
        for i in range(self.N):
            w = np.repeat(vol * (E.coef[i] + pen), self.d)
            K = B.T @ (G.T @ sp.diags(w) @ G) @ B
            out[i] = E.weights[i] * E.scale * K.diagonal()
        flat = out.ravel()
        return np.where(flat > 0, flat, 1.0)

    def unpack(self, x: np.ndarray) -> np.ndarray:
        return x.reshape(self.N, self.n_dofs)

    def field_gradients(self, Z: np.ndarray) -> np.ndarray:
        """(N, n_elem, d) element gradients of the fields (no offset)."""
        U = (self.constraint.matrix @ Z.T).T
        return (self.G @ U.T).T.reshape(self.N, self.mesh.n_elements, self.d)

    def value_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        E = self.E
        p = self.p
        Z = self.unpack(x)
        graw = self.field_gradients(Z)
        g = graw if E.gradient_offset is None else graw + E.gradient_offset[None]
        norms = np.linalg.norm(g, axis=-1)
        dens = (E.coef / p) * norms**p
        value = float(np.dot(E.weights, dens @ self.vol))
        # dV/dg per realization and element
        scale = np.zeros_like(norms)
        nz = norms > 0
        scale[nz] = E.coef[nz] * norms[nz] ** (p - 2.0)
        dV = scale[..., None] * g
        if E.delta > 0:
            if E.penalty == "variance":
                gbar = np.tensordot(E.weights, g, axes=(0, 0))
                dev = g - gbar
                dn = np.linalg.norm(dev, axis=-1)
                value += E.delta * float(np.dot(E.weights, dn**p @ self.vol))
                s = np.zeros_like(dn)
                nz = dn > 0
                s[nz] = p * dn[nz] ** (p - 2.0)
                pen = s[..., None] * dev
                pen_mean = np.tensordot(E.weights, pen, axes=(0, 0))
                dV = dV + E.delta * (pen - pen_mean)
            else:  # corrector penalty delta |grad phi|^p (offset excluded)
                nraw = np.linalg.norm(graw, axis=-1)
                value += E.delta * float(np.dot(E.weights, nraw**p @ self.vol))
                s = np.zeros_like(nraw)
                nz = nraw > 0
                s[nz] = p * nraw[nz] ** (p - 2.0)
                dV = dV + E.delta * s[..., None] * graw
        # chain rule back to reduced dofs
        flat = (self.vol[None, :, None] * dV).reshape(self.N, -1)
        grad = np.empty((self.N, self.n_dofs))
        GT = self.G.T
        for i in range(self.N):
            grad[i] = E.weights[i] * self.constraint.reduce_adjoint(GT @ flat[i])
        # load
        ubar = (self.M @ (self.constraint.matrix @ Z.T)).T
        value -= float(np.dot(E.weights, ubar @ (self.vol * E.load_values)))
        grad -= np.outer(E.weights, self.load_red)
        value *= E.scale
        grad *= E.scale
        if not np.isfinite(value):
            raise FloatingPointError("energy evaluated to a non-finite value")
        return value, grad.ravel()


def _pcg(A: sp.csr_matrix, b: np.ndarray, tol: float, max_iter: int):
    """Conjugate gradients with Jacobi preconditioning, relative residual stop."""
    bnorm = float(np.linalg.norm(b))
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return x, 0, 0.0, True
    diag = A.diagonal()
    dinv = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0)
    r = b.copy()
    z = dinv * r
    pvec = z.copy()
    rz = float(r @ z)
    it = 0
    while it < max_iter:
        Ap = A @ pvec
        alpha = rz / float(pvec @ Ap)
        x += alpha * pvec
        r -= alpha * Ap
        it += 1
        if np.linalg.norm(r) <= tol * bnorm:
            return x, it, float(np.linalg.norm(r)), True
        z = dinv * r
        rz_new = float(r @ z)
        pvec = z + (rz_new / rz) * pvec
        rz = rz_new
    return x, it, float(np.linalg.norm(r)), False


def _ncg(fun, x0: np.ndarray, tol: float, max_iter: int, precond: np.ndarray | None = None):
    """Polak-Ribiere nonlinear CG with restarts and Armijo backtracking.

    The first trial step comes from a Barzilai-Borwein estimate; one quadratic
    interpolation along the search direction sharpens it (exact line search on
    quadratic energies), then Armijo backtracking (c = 1e-4, factor 0.5)
    guards the decrease.  An optional diagonal preconditioner rescales the
    steepest-descent direction.
    """
    dinv = 1.0 / precond if precond is not None else None

    def prec(v):
        return dinv * v if dinv is not None else v

    x = x0.copy()
    f, g = fun(x)
    gnorm = float(np.linalg.norm(g))
    z = prec(g)
    d = -z
    it = 0
    s_prev = y_prev = None

    def armijo(alpha, slope):
        # the epsilon term keeps the test decidable once decreases reach the
        # floating-point resolution of the energy
        floor = 4e-16 * (1.0 + abs(f))
        for _ in range(60):
            cand = x + alpha * d
            f_c, g_c = fun(cand)
            if f_c <= f + 1e-4 * alpha * slope + floor:
                return cand, f_c, g_c, alpha
            alpha *= 0.5
        return None

    while gnorm > tol * (1.0 + abs(f)) and it < max_iter:
        restarted = float(g @ d) >= 0.0
        if restarted:
            d = -z  # restart on a non-descent direction
        slope = float(g @ d)
        dnorm = float(np.linalg.norm(d))
        if s_prev is not None and float(s_prev @ y_prev) > 0:
            bb = float(s_prev @ s_prev) / float(s_prev @ y_prev)
            alpha = bb * gnorm / max(dnorm, 1e-300)
        else:
            alpha = 1.0 / max(dnorm, 1.0)
        # secant step on the directional derivative: exact on quadratics and
        # immune to the value cancellation that stalls interpolation on f
        _, g_t = fun(x + alpha * d)
        slope_t = float(g_t @ d)
        if slope_t > slope:
            alpha = float(np.clip(alpha * slope / (slope - slope_t), 1e-3 * alpha, 1e3 * alpha))
        else:
            alpha *= 4.0  # nonconvex sample along d: expand
        hit = armijo(alpha, slope)
        if hit is None:
            if restarted or np.array_equal(d, -z):
                break  # no descent at line-search resolution
            d = -z
            continue
        x_new, f_new, g_new, alpha = hit
        assert f_new <= f + 1e-11 * (1.0 + abs(f)), "energy increased along accepted step"
        s_prev = x_new - x
        y_prev = g_new - g
        z_new = prec(g_new)
        beta = max(0.0, float(g_new @ (z_new - z)) / max(float(g @ z), 1e-300))
        d = -z_new + beta * d
        x, f, g, z = x_new, f_new, g_new, z_new
        gnorm = float(np.linalg.norm(g))
        it += 1
    return x, f, it, gnorm, gnorm <= tol * (1.0 + abs(f))


def _linear_spd_solve(obj: _Objective, tol: float, max_iter: int):
    """p = 2, no coupling: solve each realization's SPD system by PCG."""
    E = obj.E
    G, vol = obj.G, obj.vol
    extra = 2.0 * E.delta if (E.delta > 0 and E.penalty == "corrector") else 0.0
    Z = np.empty((obj.N, obj.n_dofs))
    iters = 0
    ok = True
    B = obj.constraint.matrix
    for i in range(obj.N):
        w = np.repeat(vol * (E.coef[i] + extra), obj.d)
        K = (B.T @ (G.T @ sp.diags(w) @ G) @ B).tocsr()
        b = obj.load_red.copy()
        if E.gradient_offset is not None:
            flat = (vol[:, None] * E.coef[i][:, None] * E.gradient_offset).ravel()
            b = b - obj.constraint.reduce_adjoint(G.T @ flat)
        z, it, _, conv = _pcg(K, b, tol, max_iter)
        Z[i] = z
        iters += it
        ok = ok and conv
    f, g = obj.value_and_grad(Z.ravel())
    return Z.ravel(), f, iters, float(np.linalg.norm(g)), ok


def _result_from_solution(obj: _Objective, x: np.ndarray, f, iters, gnorm, conv, t0, method):
    E = obj.E
    Z = obj.unpack(x)
    fields = []
    for i in range(obj.N):
        z = obj.constraint.normalize(Z[i])
        fields.append(
            DiscreteField(mesh=E.mesh, values=obj.constraint.expand(z), constraint=E.constraint)
        )
    mean_field = None
    if obj.N > 1:
        mv = np.tensordot(E.weights, np.stack([fl.values for fl in fields]), axes=(0, 0))
        mean_field = DiscreteField(mesh=E.mesh, values=mv, constraint=E.constraint)
    return MinimizeResult(
        fields=fields,
        mean_field=mean_field,
        energy=float(f),
        iterations=iters,
        grad_norm=gnorm,
        wall_ms=(time.perf_counter() - t0) * 1e3,
        converged=conv,
        method=method,
    )


def minimize(
    E: EnergyFunctional, tol: float = 1e-8, max_iter: int = 20_000, method: str | None = None
) -> MinimizeResult:
    """Minimize the energy over its constrained fields.

    method None picks linear CG for uncoupled p = 2 problems and nonlinear CG
    otherwise; pass "ncg" to force the nonlinear path (used for the
    self-consistency oracle).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    t0 = time.perf_counter()
    obj = _Objective(E)
    linear_ok = E.integrand.p == 2.0 and not (E.coupled and E.delta > 0)
    if method is None:
        method = "cg" if linear_ok else "ncg"
    if method == "cg":
        if not linear_ok:
            raise ValueError("linear path needs p = 2 and no variance coupling")
        x, f, iters, gnorm, conv = _linear_spd_solve(obj, tol, max_iter)
        return _result_from_solution(obj, x, f, iters, gnorm, conv, t0, "cg")
    x0 = np.zeros(obj.N * obj.n_dofs)
    x, f, iters, gnorm, conv = _ncg(
        obj.value_and_grad, x0, tol, max_iter, precond=obj.precond_diag()
    )
    return _result_from_solution(obj, x, f, iters, gnorm, conv, t0, "ncg")


def minimize_coupled(
    realizations: Sequence[Realization],
    eps: float,
    mesh: Mesh,
    integrand: IntegrandSpec,
    load: Load,
    delta: float,
    tol: float = 1e-8,
    max_iter: int = 20_000,
) -> MinimizeResult:
    """Jointly minimize the variance-regularized sample energy (N >= 2 fields)."""
    if len(realizations) < 2:
        raise ValueError("coupled minimization needs at least 2 realizations")
    E = assemble_energy(
        realizations, eps, mesh, integrand, load=load, delta=delta, coupled=delta > 0
    )
    return minimize(E, tol=tol, max_iter=max_iter)


@dataclass
class CellResult:
    value: float
    corrector: DiscreteField
    iterations: int
    grad_norm: float
    wall_ms: float
    converged: bool


def cell_problem(
    r: Realization,
    L: int,
    integrand: IntegrandSpec,
    F: Sequence[float],
    delta: float = 0.0,
    n_per_cell: int = 8,
    tol: float = 1e-9,
    max_iter: int = 50_000,
) -> CellResult:
    """Periodic corrector problem on the L-torus.

    Minimizes the cell average of V(omega, F + grad phi) + delta |grad phi|^p
    over periodic mean-zero P1 fields; returns the minimal value (the
    regularized effective integrand at F) and the corrector.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    if n_per_cell < 4:
        raise ValueError("need at least 4 subdivisions per unit cell")
    F = np.asarray(F, dtype=float)
    if F.shape != (r.dimension,) or not np.all(np.isfinite(F)):
        raise ValueError("F must be a finite vector matching the dimension")
    if r.period is None:
        r = periodize(r, L)
    elif r.period != L:
        raise ValueError(f"realization has period {r.period}, cell problem asked for {L}")
    t0 = time.perf_counter()
    d = r.dimension
    mesh = build_mesh(d, n=L * n_per_cell, size=float(L))
    coef = random_weight(integrand, r, mesh.barycenters)[None, :]
    E = EnergyFunctional(
        realizations=[r],
        weights=np.ones(1),
        eps=1.0,
        mesh=mesh,
        integrand=integrand,
        coef=coef,
        load_values=np.zeros(mesh.n_elements),
        delta=delta,
        coupled=False,
        constraint=PERIODIC_MEAN_ZERO,
        gradient_offset=np.broadcast_to(F, (mesh.n_elements, d)).copy(),
        penalty="corrector",
        scale=1.0 / float(L) ** d,
    )
    obj = _Objective(E)
    if integrand.p == 2.0:
        x, f, iters, gnorm, conv = _linear_spd_solve(obj, tol, max_iter)
    else:
        x0 = np.zeros(obj.N * obj.n_dofs)
        x, f, iters, gnorm, conv = _ncg(
            obj.value_and_grad, x0, tol, max_iter, precond=obj.precond_diag()
        )
    res = _result_from_solution(obj, x, f, iters, gnorm, conv, t0, "cell")
    return CellResult(
        value=res.energy,
        corrector=res.fields[0],
        iterations=res.iterations,
        grad_norm=res.grad_norm,
        wall_ms=res.wall_ms,
        converged=res.converged,
    )


@dataclass
class EffectiveValue:
    """Monte Carlo summary of the effective integrand at one gradient F."""

    F: tuple[float, ...]
    L: int
    delta: float
    mean: float
    stderr: float
    n_samples: int
    values: tuple[float, ...]
    iterations: int
    grad_norm: float
    wall_ms: float


def effective_integrand(
    ensemble: EnsembleSpec,
    L: int,
    integrand: IntegrandSpec,
    F_grid: Sequence[Sequence[float]],
    delta: float = 0.0,
    n_samples: int = 8,
    n_per_cell: int = 8,
    tol: float = 1e-9,
    first_index: int = 0,
) -> list[EffectiveValue]:
    """Tabulate cell-problem values over an F grid, averaged over realizations."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    rows = []
    for F in F_grid:
        vals = []
        iters = 0
        gmax = 0.0
        wall = 0.0
        for s in range(n_samples):
            r = sample_realization(ensemble, first_index + s)
            if r.period is not None and r.period != L:
                raise ValueError("ensemble period conflicts with requested L")
            res = cell_problem(r, L, integrand, F, delta=delta, n_per_cell=n_per_cell, tol=tol)
            vals.append(res.value)
            iters += res.iterations
            gmax = max(gmax, res.grad_norm)
            wall += res.wall_ms
        arr = np.asarray(vals)
        stderr = float(arr.std(ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else 0.0
        rows.append(
            EffectiveValue(
                F=tuple(float(c) for c in F),
                L=L,
                delta=delta,
                mean=float(arr.mean()),
                stderr=stderr,
                n_samples=n_samples,
                values=tuple(float(v) for v in arr),
                iterations=iters,
                grad_norm=gmax,
                wall_ms=wall,
            )
        )
    return rows
