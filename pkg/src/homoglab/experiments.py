"""Desk-scale convergence studies with CSV/SVG outputs.

Four studies:
  sweep            quenched minimizations against the homogenized reference
  diagram          variance-regularization commutative diagram corners
  nonergodic       per-realization limits of a periodized ensemble + clusters
  quenched-vs-mean per-realization pairing trajectories vs the mean and limit

plus the operation commands cell / solve / pair / young.  Independent
(eps, seed) tasks run across a process pool; every aggregation is an ordered
reduction over the task list, so outputs are byte-identical for any worker
count.
"""

from __future__ import annotations

import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, ExperimentConfig
from .integrand import moment_estimate
from .medium import DiscreteValues, EnsembleSpec, sample_realization
from .meshing import DiscreteField, build_mesh, lp_distance
from .reporting import (
    CELL_HEADER,
    PAIRING_HEADER,
    RATES_HEADER,
    REPORT_HEADER,
    TIMING_HEADER,
    YOUNG_HEADER,
    ReportRow,
    render_loglog_svg,
    write_csv,
)
from .solver import assemble_energy, cell_problem, effective_integrand, minimize
from .twoscale import (
    Dictionary,
    PairingVector,
    build_dictionary,
    empirical_young_measure,
    limit_pairing,
    metric_distance,
    quenched_pairing,
    sample_correctors,
)

__all__ = [
    "StudyReport",
    "run_homogenization_sweep",
    "run_regularization_diagram",
    "run_nonergodic_study",
    "run_quenched_vs_mean",
    "run_cell_table",
    "run_solve",
    "run_pairings",
    "run_young",
    "emit_plots",
    "write_outputs",
]


@dataclass
class StudyReport:
    """Everything a study produced, ready for CSV/SVG emission."""

    kind: str
    rows: list[ReportRow] = field(default_factory=list)
    rate_rows: list[list] = field(default_factory=list)
    pairing_rows: list[list] = field(default_factory=list)
    young_rows: list[list] = field(default_factory=list)
    cell_rows: list[list] = field(default_factory=list)
    timing_rows: list[list] = field(default_factory=list)
    realization_rows: list[list] = field(default_factory=list)
    series: dict[str, tuple[tuple[float, ...], tuple[float, ...]]] = field(default_factory=dict)
    summary: dict[str, float | int | str | bool] = field(default_factory=dict)
    any_nonconverged: bool = False


def _log_realizations(rep: StudyReport, cfg: ExperimentConfig) -> None:
    """Record derived seeds and offsets so every run is reconstructible."""
    for i in range(cfg.n_realizations):
        r = sample_realization(cfg.ensemble, i)
        rep.realization_rows.append(
            [i, r.seed, " ".join(repr(y) for y in r.offset), r.period]
        )


def _log_growth(rep: StudyReport, cfg: ExperimentConfig, n: int = 2000) -> None:
    from .integrand import verify_growth

    g = verify_growth(cfg.integrand, cfg.ensemble, n)
    rep.summary.update(
        growth_c_low=g.c_low, growth_c_high=g.c_high, satisfies_p_growth=g.satisfies_growth
    )


def _pmap(fn, payloads, threads: int):
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, payloads))
    return [fn(p) for p in payloads]


def _fit_rate(eps: list[float], vals: list[float]) -> tuple[float, float]:
    """Least-squares slope of log(val) vs log(eps) and the fit residual."""
    pairs = [(e, v) for e, v in zip(eps, vals) if v > 0]
    if len(pairs) < 2:
        return float("nan"), float("nan")
    x = np.log([e for e, _ in pairs])
    y = np.log([v for _, v in pairs])
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, res, _, _ = np.linalg.lstsq(A, y, rcond=None)
    residual = float(np.sqrt(res[0] / len(x))) if res.size else 0.0
    return float(coef[0]), residual


def _reference_coefficient(cfg: ExperimentConfig, delta: float = 0.0) -> tuple[float, float]:
    """Effective isotropic coefficient from unit-direction cell problems.

    Returns (c_hom, stderr_of_c); V_hom(F) ~= (c_hom / p) |F|^p.
    """
    d = cfg.ensemble.dimension
    L = max(cfg.L_list)
    dirs = [tuple(np.eye(d)[c]) for c in range(d)]
    rows = effective_integrand(
        cfg.ensemble,
        L,
        cfg.integrand,
        dirs,
        delta=delta,
        n_samples=cfg.n_realizations,
        n_per_cell=cfg.n_per_cell,
        tol=cfg.tol,
    )
    c = float(np.mean([r.mean for r in rows])) * cfg.integrand.p
    err = float(np.sqrt(np.mean([r.stderr**2 for r in rows]))) * cfg.integrand.p
    return c, err


def _homogenized_solve(cfg: ExperimentConfig, c_hom: float):
    """Fine-mesh minimizer of the constant-coefficient limit problem."""
    from .integrand import IntegrandSpec

    mesh = build_mesh(cfg.ensemble.dimension, cfg.fine_n)
    hom_ens = EnsembleSpec(
        dimension=cfg.ensemble.dimension,
        cells=DiscreteValues((c_hom,), (1.0,)),
        shift_sampling=False,
        seed=cfg.seed,
    )
    hom_V = IntegrandSpec(p=cfg.integrand.p)
    r = sample_realization(hom_ens, 0)
    E = assemble_energy([r], 1.0, mesh, hom_V, load=cfg.load)
    res = minimize(E, tol=min(cfg.tol, 1e-10), max_iter=cfg.max_iter)
    return res.fields[0], res.energy


def _check_resolution(cfg: ExperimentConfig, force: bool) -> None:
    if cfg.h_over_eps < 4 and not force:
        raise ConfigError("mesh rule leaves h > eps/4; rerun with --force to override")


# ---------------------------------------------------------------- sweep ----


def _sweep_task(payload):
    cfg, eps, index, dico, limit_values, limit_norm = payload
    t0 = time.perf_counter()
    r = sample_realization(cfg.ensemble, index)
    mesh = build_mesh(cfg.ensemble.dimension, cfg.mesh_n(eps))
    E = assemble_energy([r], eps, mesh, cfg.integrand, load=cfg.load)
    res = minimize(E, tol=cfg.tol, max_iter=cfg.max_iter)
    u = res.fields[0]
    pv = quenched_pairing(u, r, eps, dico)
    lim = PairingVector(
        values=limit_values, eps=0.0, norm=limit_norm, tag="limit", dico=dico, blocks=1
    )
    return {
        "eps": eps,
        "seed": index,
        "min_energy": res.energy,
        "iters": res.iterations,
        "grad_norm": res.grad_norm,
        "converged": res.converged,
        "dist_pairing": metric_distance(pv, lim),
        "nodal": u.values,
        "mesh_n": mesh.n,
        "wall_ms": (time.perf_counter() - t0) * 1e3,
    }


def run_homogenization_sweep(
    cfg: ExperimentConfig, threads: int = 1, force: bool = False
) -> StudyReport:
    """Quenched minimizations across eps against the homogenized reference."""
    _check_resolution(cfg, force)
    rep = StudyReport(kind="sweep")
    _log_realizations(rep, cfg)
    _log_growth(rep, cfg)
    t0 = time.perf_counter()
    c_hom, c_err = _reference_coefficient(cfg)
    u_hom, min_hom = _homogenized_solve(cfg, c_hom)
    dico = build_dictionary(
        cfg.ensemble,
        cfg.probe_radius,
        cfg.cosine_degree,
        cfg.integrand.p,
        cfg.mc_samples,
        cfg.max_entries,
    )
    lim = limit_pairing(u_hom, dico, mode="function")
    rep.timing_rows.append(["sweep", "reference", (time.perf_counter() - t0) * 1e3])
    rep.summary.update(c_hom=c_hom, c_hom_stderr=c_err, min_hom=min_hom)

    payloads = [
        (cfg, eps, i, dico, lim.values, lim.norm)
        for eps in cfg.eps_list
        for i in range(cfg.n_realizations)
    ]
    results = _pmap(_sweep_task, payloads, threads)

    gap_med, dist_med = [], []
    for eps in cfg.eps_list:
        sub = [res for res in results if res["eps"] == eps]
        mesh = build_mesh(cfg.ensemble.dimension, sub[0]["mesh_n"])
        gaps, dists = [], []
        for res in sub:
            u = DiscreteField(mesh=mesh, values=res["nodal"])
            gap = abs(res["min_energy"] - min_hom)
            dlp = lp_distance(u, u_hom, cfg.integrand.p)
            gaps.append(gap)
            dists.append(dlp)
            rep.rows.append(
                ReportRow(
                    study="sweep",
                    eps=eps,
                    delta=0.0,
                    L=max(cfg.L_list),
                    seed=str(res["seed"]),
                    min_energy=res["min_energy"],
                    energy_gap=gap,
                    dist_lp=dlp,
                    dist_pairing=res["dist_pairing"],
                    iters=res["iters"],
                    grad_norm=res["grad_norm"],
                )
            )
            rep.timing_rows.append(["sweep", f"eps={eps:g},seed={res['seed']}", res["wall_ms"]])
            rep.any_nonconverged |= not res["converged"]
        gap_med.append(float(np.median(gaps)))
        dist_med.append(float(np.median(dists)))
    rate, resid = _fit_rate(list(cfg.eps_list), gap_med)
    rep.rate_rows.append(["sweep", "median_energy_gap", rate, resid])
    rate2, resid2 = _fit_rate(list(cfg.eps_list), dist_med)
    rep.rate_rows.append(["sweep", "median_lp_distance", rate2, resid2])
    rep.series["median energy gap"] = (cfg.eps_list, tuple(gap_med))
    rep.series["median Lp distance"] = (cfg.eps_list, tuple(dist_med))
    rep.summary["gap_monotone"] = all(
        gap_med[i + 1] <= gap_med[i] + 1e-15 for i in range(len(gap_med) - 1)
    )
    return rep


# -------------------------------------------------------------- diagram ----


def _diagram_task(payload):
    cfg, eps, delta = payload
    t0 = time.perf_counter()
    reals = [sample_realization(cfg.ensemble, i) for i in range(cfg.n_realizations)]
    mesh = build_mesh(cfg.ensemble.dimension, cfg.mesh_n(eps))
    E = assemble_energy(
        reals, eps, mesh, cfg.integrand, load=cfg.load, delta=delta, coupled=delta > 0
    )
    res = minimize(E, tol=cfg.tol, max_iter=cfg.max_iter)
    return {
        "eps": eps,
        "delta": delta,
        "min_energy": res.energy,
        "iters": res.iterations,
        "grad_norm": res.grad_norm,
        "converged": res.converged,
        "wall_ms": (time.perf_counter() - t0) * 1e3,
    }


def _rational_extrapolate(deltas, values) -> float:
    """delta -> 0 limit from a (1,1) rational fit value(d) = (a + b d)/(1 + e d).

    The regularized cell value of a two-phase weight is exactly such a
    rational function of the penalty strength, so three points recover the
    limit; more points are fit by least squares.
    """
    d = np.asarray(deltas, dtype=float)
    c = np.asarray(values, dtype=float)
    A = np.stack([np.ones_like(d), d, -c * d], axis=1)
    sol, *_ = np.linalg.lstsq(A, c, rcond=None)
    return float(sol[0])


def run_regularization_diagram(
    cfg: ExperimentConfig, threads: int = 1, force: bool = False
) -> StudyReport:
    """Evaluate the four corners of the regularization diagram at finite proxies.

    Path one sends delta -> 0 at finite eps (decoupled solves), then eps -> 0;
    path two homogenizes at fixed delta (regularized cell formula), then sends
    delta -> 0 by extrapolating down the delta list.  The two ends must agree
    within the configured tolerance.
    """
    _check_resolution(cfg, force)
    if not cfg.delta_list:
        raise ConfigError("diagram study needs a nonempty delta list")
    rep = StudyReport(kind="diagram")
    _log_realizations(rep, cfg)
    _log_growth(rep, cfg)
    if cfg.integrand.degenerate:
        mom = moment_estimate(cfg.integrand.lambda_cells, cfg.integrand.p, 20_000)
        rep.summary.update(moment=mom.value, moment_stderr=mom.stderr, moment_diverging=mom.diverging)
        if mom.diverging:
            warnings.warn(
                "inverse-moment estimate did not stabilize; continuing as a stress test"
            )

    deltas = list(cfg.delta_list) + [0.0]
    payloads = [(cfg, eps, dl) for eps in cfg.eps_list for dl in deltas]
    results = _pmap(_diagram_task, payloads, threads)
    for res in results:
        rep.rows.append(
            ReportRow(
                study="diagram",
                eps=res["eps"],
                delta=res["delta"],
                L=max(cfg.L_list),
                seed="mean",
                min_energy=res["min_energy"],
                iters=res["iters"],
                grad_norm=res["grad_norm"],
            )
        )
        rep.timing_rows.append(
            ["diagram", f"eps={res['eps']:g},delta={res['delta']:g}", res["wall_ms"]]
        )
        rep.any_nonconverged |= not res["converged"]

    # homogenized corners per delta (eps = 0 rows)
    c_by_delta = {}
    for dl in deltas:
        t0 = time.perf_counter()
        c_dl, _ = _reference_coefficient(cfg, delta=dl)
        u_hom, min_hom = _homogenized_solve(cfg, c_dl)
        c_by_delta[dl] = (c_dl, min_hom)
        rep.rows.append(
            ReportRow(
                study="diagram",
                eps=0.0,
                delta=dl,
                L=max(cfg.L_list),
                seed="hom",
                min_energy=min_hom,
            )
        )
        rep.timing_rows.append(["diagram", f"hom,delta={dl:g}", (time.perf_counter() - t0) * 1e3])

    eps_min = min(cfg.eps_list)
    delta_min = min(cfg.delta_list)
    path_eps_route = next(
        r["min_energy"] for r in results if r["eps"] == eps_min and r["delta"] == 0.0
    )
    # delta -> 0 along the homogenized column: extrapolate when the list
    # supports it, otherwise take the smallest delta
    if len(cfg.delta_list) >= 3:
        c_star = _rational_extrapolate(
            list(cfg.delta_list), [c_by_delta[dl][0] for dl in cfg.delta_list]
        )
        c_floor = min(c_by_delta[dl][0] for dl in cfg.delta_list)
        if not (0.0 < c_star <= c_floor + 1e-12):
            c_star = c_by_delta[delta_min][0]
        _, path_hom_route = _homogenized_solve(cfg, c_star)
    else:
        c_star = c_by_delta[delta_min][0]
        path_hom_route = c_by_delta[delta_min][1]
    ref = c_by_delta[0.0][1]
    disagreement = abs(path_eps_route - path_hom_route)
    rep.summary.update(
        path_delta_then_eps=path_eps_route,
        path_eps_then_delta=path_hom_route,
        c_extrapolated=c_star,
        min_hom=ref,
        disagreement=disagreement,
        rel_disagreement=disagreement / abs(ref) if ref else float("inf"),
        c_monotone=all(
            c_by_delta[a][0] >= c_by_delta[b][0] - 1e-12
            for a, b in zip(deltas, deltas[1:])
        ),
    )
    for dl in cfg.delta_list:
        xs, ys = [], []
        for res in results:
            if res["delta"] == dl:
                xs.append(res["eps"])
                ys.append(abs(res["min_energy"] - c_by_delta[dl][1]))
        rep.series[f"|minE(eps,{dl:g}) - minE(hom,{dl:g})|"] = (tuple(xs), tuple(ys))
    return rep


# ------------------------------------------------------------ nonergodic ----


def _nonergodic_task(payload):
    cfg, eps, index, dico = payload
    t0 = time.perf_counter()
    r = sample_realization(cfg.ensemble, index)
    mesh = build_mesh(cfg.ensemble.dimension, cfg.mesh_n(eps))
    E = assemble_energy([r], eps, mesh, cfg.integrand, load=cfg.load)
    res = minimize(E, tol=cfg.tol, max_iter=cfg.max_iter)
    pv = quenched_pairing(res.fields[0], r, eps, dico)
    return {
        "eps": eps,
        "seed": index,
        "min_energy": res.energy,
        "iters": res.iterations,
        "grad_norm": res.grad_norm,
        "converged": res.converged,
        "values": pv.values,
        "norm": pv.norm,
        "wall_ms": (time.perf_counter() - t0) * 1e3,
    }


def run_nonergodic_study(cfg: ExperimentConfig, threads: int = 1, force: bool = False) -> StudyReport:
    """Cluster per-realization limits of a periodized (nonergodic) ensemble.

    Demonstrates the omega-dependent limit: with distinct fundamental cells
    the empirical Young measure keeps more than one cluster, unlike the
    ergodic case.
    """
    _check_resolution(cfg, force)
    if cfg.ensemble.period is None:
        raise ConfigError("nonergodic study needs an ensemble with a periodization length")
    rep = StudyReport(kind="nonergodic")
    _log_realizations(rep, cfg)
    dico = build_dictionary(
        cfg.ensemble,
        cfg.probe_radius,
        cfg.cosine_degree,
        cfg.integrand.p,
        cfg.mc_samples,
        cfg.max_entries,
    )
    # exact per-realization limits via the fundamental cell problem
    limits = {}
    for i in range(cfg.n_realizations):
        t0 = time.perf_counter()
        r = sample_realization(cfg.ensemble, i)
        res = cell_problem(
            r,
            cfg.ensemble.period,
            cfg.integrand,
            np.eye(cfg.ensemble.dimension)[0],
            n_per_cell=cfg.n_per_cell,
            tol=cfg.tol,
        )
        c_i = cfg.integrand.p * res.value
        u_hom_i, min_hom_i = _homogenized_solve(cfg, c_i)
        limits[str(i)] = limit_pairing(u_hom_i, dico, mode="function", realizations=[r])
        rep.rows.append(
            ReportRow(
                study="nonergodic",
                eps=0.0,
                delta=0.0,
                L=cfg.ensemble.period,
                seed=str(i),
                min_energy=min_hom_i,
                dist_pairing=None,
                iters=res.iterations,
                grad_norm=res.grad_norm,
            )
        )
        rep.timing_rows.append(["nonergodic", f"limit,seed={i}", (time.perf_counter() - t0) * 1e3])

    trajectories: dict[str, list[PairingVector]] = {str(i): [] for i in range(cfg.n_realizations)}
    if cfg.eps_list:
        payloads = [
            (cfg, eps, i, dico) for eps in cfg.eps_list for i in range(cfg.n_realizations)
        ]
        results = _pmap(_nonergodic_task, payloads, threads)
        for res in results:
            key = str(res["seed"])
            pv = PairingVector(
                values=res["values"],
                eps=res["eps"],
                norm=res["norm"],
                tag=key,
                dico=dico,
            )
            trajectories[key].append(pv)
            rep.rows.append(
                ReportRow(
                    study="nonergodic",
                    eps=res["eps"],
                    delta=0.0,
                    L=cfg.ensemble.period,
                    seed=key,
                    min_energy=res["min_energy"],
                    dist_pairing=metric_distance(pv, limits[key]),
                    iters=res["iters"],
                    grad_norm=res["grad_norm"],
                )
            )
            rep.timing_rows.append(
                ["nonergodic", f"eps={res['eps']:g},seed={res['seed']}", res["wall_ms"]]
            )
            rep.any_nonconverged |= not res["converged"]
        ym = empirical_young_measure(trajectories, cfg.linkage_tol)
    else:
        ym = empirical_young_measure({k: [v] for k, v in limits.items()}, cfg.linkage_tol)
    ym_limit = empirical_young_measure({k: [v] for k, v in limits.items()}, cfg.linkage_tol)
    for ci, cluster in enumerate(ym.clusters):
        for j, val in enumerate(cluster.barycenter.values):
            rep.young_rows.append([ci, cluster.weight, cluster.diameter, j + 1, val])
    rep.summary.update(
        n_clusters=ym.n_clusters,
        n_clusters_limit=ym_limit.n_clusters,
        weights=",".join(f"{w:g}" for w in ym.weights),
        min_separation=ym.min_separation,
        max_cauchy_defect=max(ym.cauchy_defects.values()),
    )
    if cfg.eps_list:
        xs = cfg.eps_list
        med = []
        for eps in xs:
            med.append(
                float(
                    np.median(
                        [
                            row.dist_pairing
                            for row in rep.rows
                            if row.eps == eps and row.dist_pairing is not None
                        ]
                    )
                )
            )
        rep.series["median distance to own limit"] = (xs, tuple(med))
    return rep


# -------------------------------------------------------- quenched vs mean ----


def _qvm_task(payload):
    cfg, eps, index, dico = payload
    t0 = time.perf_counter()
    r = sample_realization(cfg.ensemble, index)
    mesh = build_mesh(cfg.ensemble.dimension, cfg.mesh_n(eps))
    E = assemble_energy([r], eps, mesh, cfg.integrand, load=cfg.load)
    res = minimize(E, tol=cfg.tol, max_iter=cfg.max_iter)
    pv = quenched_pairing(res.fields[0], r, eps, dico, include_gradient=True)
    return {
        "eps": eps,
        "seed": index,
        "min_energy": res.energy,
        "iters": res.iterations,
        "grad_norm": res.grad_norm,
        "converged": res.converged,
        "values": pv.values,
        "norm": pv.norm,
        "wall_ms": (time.perf_counter() - t0) * 1e3,
    }


def run_quenched_vs_mean(cfg: ExperimentConfig, threads: int = 1, force: bool = False) -> StudyReport:
    """Compare quenched pairing trajectories with the mean and limit pairings."""
    _check_resolution(cfg, force)
    if cfg.ensemble.period is not None:
        raise ConfigError("quenched-vs-mean study needs the ergodic (unperiodized) ensemble")
    rep = StudyReport(kind="quenched-vs-mean")
    _log_realizations(rep, cfg)
    dico = build_dictionary(
        cfg.ensemble,
        cfg.probe_radius,
        cfg.cosine_degree,
        cfg.integrand.p,
        cfg.mc_samples,
        cfg.max_entries,
    )
    t0 = time.perf_counter()
    L = max(cfg.L_list)
    csets = sample_correctors(
        cfg.ensemble,
        L,
        cfg.integrand,
        n_samples=cfg.n_realizations,
        n_per_cell=cfg.n_per_cell,
        tol=cfg.tol,
    )
    c_hom, _ = _reference_coefficient(cfg)
    u_hom, min_hom = _homogenized_solve(cfg, c_hom)
    lim = limit_pairing(u_hom, dico, mode="gradient", corrector_sets=csets)
    rep.timing_rows.append(["quenched-vs-mean", "limit", (time.perf_counter() - t0) * 1e3])
    rep.summary.update(c_hom=c_hom, min_hom=min_hom)

    payloads = [(cfg, eps, i, dico) for eps in cfg.eps_list for i in range(cfg.n_realizations)]
    results = _pmap(_qvm_task, payloads, threads)

    trajectories: dict[str, list[PairingVector]] = {str(i): [] for i in range(cfg.n_realizations)}
    mean_trajectory: list[PairingVector] = []
    mean_dists, max_q_dists = [], []
    contraction_ok = True
    for eps in cfg.eps_list:
        sub = [r for r in results if r["eps"] == eps]
        vecs = []
        for res in sub:
            pv = PairingVector(
                values=res["values"],
                eps=eps,
                norm=res["norm"],
                tag=str(res["seed"]),
                dico=dico,
                blocks=1 + cfg.ensemble.dimension,
            )
            vecs.append(pv)
            trajectories[str(res["seed"])].append(pv)
            dq = metric_distance(pv, lim)
            rep.rows.append(
                ReportRow(
                    study="quenched-vs-mean",
                    eps=eps,
                    delta=0.0,
                    L=L,
                    seed=str(res["seed"]),
                    min_energy=res["min_energy"],
                    energy_gap=abs(res["min_energy"] - min_hom),
                    dist_pairing=dq,
                    iters=res["iters"],
                    grad_norm=res["grad_norm"],
                )
            )
            rep.timing_rows.append(
                ["quenched-vs-mean", f"eps={eps:g},seed={res['seed']}", res["wall_ms"]]
            )
            rep.any_nonconverged |= not res["converged"]
            for j, val in enumerate(pv.values):
                rep.pairing_rows.append(
                    [res["seed"], eps, j + 1, _phi_label(dico, j), val]
                )
        mean_vec = PairingVector(
            values=np.mean(np.stack([v.values for v in vecs]), axis=0),
            eps=eps,
            norm=float(np.mean([v.norm for v in vecs])),
            tag="mean",
            dico=dico,
            blocks=1 + cfg.ensemble.dimension,
        )
        mean_trajectory.append(mean_vec)
        dm = metric_distance(mean_vec, lim)
        dq_max = max(metric_distance(v, lim) for v in vecs)
        contraction_ok &= dm <= dq_max + 1e-15
        mean_dists.append(dm)
        max_q_dists.append(dq_max)
        rep.rows.append(
            ReportRow(
                study="quenched-vs-mean",
                eps=eps,
                delta=0.0,
                L=L,
                seed="mean",
                dist_pairing=dm,
            )
        )
        for j, val in enumerate(mean_vec.values):
            rep.pairing_rows.append(["mean", eps, j + 1, _phi_label(dico, j), val])
    for j, val in enumerate(lim.values):
        rep.pairing_rows.append(["limit", 0.0, j + 1, _phi_label(dico, j), val])

    ym = empirical_young_measure(trajectories, cfg.linkage_tol)
    for ci, cluster in enumerate(ym.clusters):
        for j, val in enumerate(cluster.barycenter.values):
            rep.young_rows.append([ci, cluster.weight, cluster.diameter, j + 1, val])
    mean_cauchy = max(
        (metric_distance(a, b) for a, b in zip(mean_trajectory, mean_trajectory[1:])),
        default=0.0,
    )
    max_cauchy = max(ym.cauchy_defects.values())
    rep.summary.update(
        n_clusters=ym.n_clusters,
        cluster_diameter=max(c.diameter for c in ym.clusters),
        barycenter_to_limit=metric_distance(ym.clusters[0].barycenter, lim),
        mean_contraction_ok=contraction_ok,
        max_cauchy_defect=max_cauchy,
        mean_cauchy_defect=mean_cauchy,
        mean_cauchy_ok=mean_cauchy <= max_cauchy + 1e-15,
    )
    rep.series["distance(mean, limit)"] = (cfg.eps_list, tuple(mean_dists))
    rep.series["max distance(quenched, limit)"] = (cfg.eps_list, tuple(max_q_dists))
    return rep


def _phi_label(dico: Dictionary, flat_j: int) -> str:
    J = len(dico)
    block, j = divmod(flat_j, J)
    suffix = "" if block == 0 else f"@g{block}"
    return dico.entries[j].phi_id + suffix


# ------------------------------------------------- operation commands ----


def run_cell_table(cfg: ExperimentConfig, threads: int = 1, force: bool = False) -> StudyReport:
    """Tabulate the effective integrand over (F, L, delta)."""
    rep = StudyReport(kind="cell")
    deltas = list(cfg.delta_list) if cfg.delta_list else [0.0]
    for L in cfg.L_list:
        for dl in deltas:
            rows = effective_integrand(
                cfg.ensemble,
                L,
                cfg.integrand,
                cfg.F_grid,
                delta=dl,
                n_samples=cfg.n_realizations,
                n_per_cell=cfg.n_per_cell,
                tol=cfg.tol,
            )
            for r in rows:
                rep.cell_rows.append(
                    [
                        " ".join(repr(c) for c in r.F),
                        r.L,
                        r.delta,
                        None,
                        cfg.seed,
                        r.mean,
                        r.stderr,
                        r.iterations,
                        r.grad_norm,
                        r.wall_ms,
                    ]
                )
                rep.timing_rows.append(["cell", f"L={L},delta={dl:g}", r.wall_ms])
    if len(cfg.L_list) > 1:
        for dl in deltas:
            xs = tuple(float(L) for L in cfg.L_list)
            ys = []
            for L in cfg.L_list:
                sub = [
                    float(row[5])
                    for row in rep.cell_rows
                    if row[1] == L and row[2] == dl
                ]
                ys.append(float(np.mean(sub)))
            rep.series[f"mean value, delta={dl:g}"] = (xs, tuple(ys))
    return rep


def run_solve(cfg: ExperimentConfig, threads: int = 1, force: bool = False) -> StudyReport:
    """Minimize the configured oscillatory energy per (eps, seed)."""
    _check_resolution(cfg, force)
    rep = StudyReport(kind="solve")
    delta = cfg.delta_list[0] if cfg.delta_list else 0.0
    for eps in cfg.eps_list:
        mesh = build_mesh(cfg.ensemble.dimension, cfg.mesh_n(eps))
        for i in range(cfg.n_realizations):
            r = sample_realization(cfg.ensemble, i)
            E = assemble_energy([r], eps, mesh, cfg.integrand, load=cfg.load, delta=0.0)
            res = minimize(E, tol=cfg.tol, max_iter=cfg.max_iter)
            rep.cell_rows.append(
                [
                    None,
                    max(cfg.L_list),
                    delta,
                    eps,
                    i,
                    res.energy,
                    None,
                    res.iterations,
                    res.grad_norm,
                    res.wall_ms,
                ]
            )
            rep.any_nonconverged |= not res.converged
            rep.timing_rows.append(["solve", f"eps={eps:g},seed={i}", res.wall_ms])
    return rep


def run_pairings(cfg: ExperimentConfig, threads: int = 1, force: bool = False) -> StudyReport:
    """Quenched pairings of minimizers, one CSV row per dictionary entry."""
    rep = run_quenched_vs_mean(cfg, threads=threads, force=force)
    rep.kind = "pair"
    return rep


def run_young(cfg: ExperimentConfig, threads: int = 1, force: bool = False) -> StudyReport:
    """Young-measure clustering of pairing trajectories."""
    if cfg.ensemble.period is not None:
        rep = run_nonergodic_study(cfg, threads=threads, force=force)
    else:
        rep = run_quenched_vs_mean(cfg, threads=threads, force=force)
    rep.kind = "young"
    return rep


_RUNNERS = {
    "sweep": run_homogenization_sweep,
    "diagram": run_regularization_diagram,
    "nonergodic": run_nonergodic_study,
    "quenched-vs-mean": run_quenched_vs_mean,
    "cell": run_cell_table,
    "solve": run_solve,
    "pair": run_pairings,
    "young": run_young,
}


def run_study(cfg: ExperimentConfig, threads: int = 1, force: bool = False) -> StudyReport:
    try:
        runner = _RUNNERS[cfg.kind]
    except KeyError:
        raise ConfigError(f"no runner for study kind {cfg.kind!r}")
    return runner(cfg, threads=threads, force=force)


# ------------------------------------------------------------- outputs ----


def emit_plots(rep: StudyReport, out_dir: str, provenance: str) -> list[str]:
    """Write one log-log SVG per series group; skip silently when empty."""
    if not rep.series:
        return []
    plots_dir = os.path.join(out_dir, "plots")
    os.makedirs(plots_dir, exist_ok=True)
    ylabel = {
        "sweep": "energy gap / Lp distance",
        "diagram": "energy alignment",
        "nonergodic": "metric distance",
        "quenched-vs-mean": "metric distance",
        "pair": "metric distance",
        "young": "metric distance",
        "cell": "effective value",
    }.get(rep.kind, "value")
    xlabel = "L" if rep.kind == "cell" else "eps"
    series = []
    for label, (xs, ys) in rep.series.items():
        pts = [(x, y) for x, y in zip(xs, ys) if y > 0]
        if pts:
            series.append((label, [p[0] for p in pts], [p[1] for p in pts]))
    if not series:
        return []
    svg = render_loglog_svg(series, f"{rep.kind} study", xlabel, ylabel, provenance)
    path = os.path.join(plots_dir, f"{rep.kind}.svg")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg)
    return [path]


def write_outputs(rep: StudyReport, cfg: ExperimentConfig, out_dir: str) -> list[str]:
    """Persist report.csv (deterministic), side tables, config echo, and plots."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []

    def put(name, header, rows):
        p = os.path.join(out_dir, name)
        write_csv(p, header, rows)
        paths.append(p)

    if rep.rows:
        put("report.csv", REPORT_HEADER, [r.cells() for r in rep.rows])
    if rep.rate_rows:
        put("rates.csv", RATES_HEADER, rep.rate_rows)
    if rep.pairing_rows:
        put("pairings.csv", PAIRING_HEADER, rep.pairing_rows)
    if rep.young_rows:
        put("young.csv", YOUNG_HEADER, rep.young_rows)
    if rep.cell_rows:
        put("cell.csv", CELL_HEADER, rep.cell_rows)
    if rep.timing_rows:
        put("timings.csv", TIMING_HEADER, rep.timing_rows)
    if rep.realization_rows:
        put("realizations.csv", ["index", "seed", "offset", "period"], rep.realization_rows)
    resolved = os.path.join(out_dir, "config.resolved")
    with open(resolved, "w", encoding="utf-8") as fh:
        fh.write(cfg.resolved_text)
    paths.append(resolved)
    if rep.summary:
        summary = os.path.join(out_dir, "summary.txt")
        with open(summary, "w", encoding="utf-8") as fh:
            for key in sorted(rep.summary):
                fh.write(f"{key} = {rep.summary[key]}\n")
        paths.append(summary)
    provenance = f"config={cfg.config_hash} seed={cfg.seed}"
    paths.extend(emit_plots(rep, out_dir, provenance))
    return paths
