"""Turn solved cone programs into physical impulse plans and check them.

The conversion back to physical velocity units uses the per-node factor
k^2 * rho_j that relates a transformed velocity jump to the actual one.
Verification re-propagates the boundary state through fresh transition
matrices and the plan's impulses only; it never touches the optimizer's
internal state chain.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import relative_dynamics as rd
from .conic_solver import ConicProblem, ConicSolution, SolverSettings, solve
from .kepler import TargetOrbit, time_from_true
from .relative_dynamics import RelativeState
from .transcription import (
    ExpandedSolution,
    Grid,
    Scenario,
    assemble_socp,
    build_grid,
    expand_solution,
    grid_from_nodes,
    transform_boundaries,
)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Impulse:
    theta: float
    t: float
    dv: np.ndarray
    magnitude: float


@dataclass(frozen=True)
class TerminalError:
    """Miss distance at the final anomaly, physical and nondimensional."""

    position: float
    velocity: float
    position_scaled: float
    velocity_scaled: float


@dataclass
class ImpulsePlan:
    """Extracted burn sequence plus the raw per-node magnitudes.

    total_dv sums every grid node (the exact optimizer cost); impulses
    holds only the nodes above the extraction tolerance, with the
    discarded mass reported in dropped_dv.
    """

    impulses: list[Impulse]
    total_dv: float
    dropped_dv: float
    n_impulses: int
    mesh_m: int
    extraction_tol: float
    raw_thetas: np.ndarray
    raw_times: np.ndarray
    raw_dv: np.ndarray
    raw_magnitudes: np.ndarray
    terminal_error: Optional[TerminalError] = None


def _physical_dv(expanded: ExpandedSolution, grid: Grid, scenario: Scenario) -> np.ndarray:
    """Per-node physical impulse vectors, (m, 3) in scenario velocity units."""
    orbit = scenario.orbit
    factors = orbit.k2 * grid.rho * scenario.units.length
    dv = np.zeros((grid.m, 3))
    if scenario.planar:
        dv[:, 0] = expanded.dv[:, 0]
        dv[:, 2] = expanded.dv[:, 1]
    else:
        dv[:] = expanded.dv
    return dv * factors[:, None]


def extract_impulses(
    expanded: ExpandedSolution,
    grid: Grid,
    scenario: Scenario,
    tol: Optional[float] = None,
) -> ImpulsePlan:
    """Physical impulse plan from an expanded solution.

    tol is expressed in the problem's normalized velocity unit; nodes at
    or below it are dropped from the plan but still counted in total_dv.
    """
    if tol is None:
        tol = scenario.extraction_tol
    dv = _physical_dv(expanded, grid, scenario)
    mags = np.linalg.norm(dv, axis=1)
    threshold = tol * scenario.units.velocity
    keep = mags > threshold
    impulses = [
        Impulse(theta=float(grid.nodes[j]), t=float(grid.times[j]), dv=dv[j], magnitude=float(mags[j]))
        for j in np.flatnonzero(keep)
    ]
    return ImpulsePlan(
        impulses=impulses,
        total_dv=float(mags.sum()),
        dropped_dv=float(mags[~keep].sum()),
        n_impulses=len(impulses),
        mesh_m=grid.m,
        extraction_tol=float(tol),
        raw_thetas=grid.nodes.copy(),
        raw_times=grid.times.copy(),
        raw_dv=dv,
        raw_magnitudes=mags,
    )


def _transformed_jump(dv_phys: np.ndarray, theta: float, orbit: TargetOrbit) -> np.ndarray:
    return dv_phys / (orbit.k2 * rd.rho(theta, orbit.e))


def verify_plan(plan: ImpulsePlan, scenario: Scenario) -> TerminalError:
    """Propagate the boundary state through the plan and report the miss.

    Independent of the optimizer: only the plan's impulse list and fresh
    transition matrices are used.
    """
    orbit = scenario.orbit
    x0t, xft = transform_boundaries(scenario)
    state = x0t.vector.copy()
    theta = scenario.theta0
    for imp in plan.impulses:
        state = rd.stm_full(imp.theta, theta, orbit) @ state
        state[3:] += _transformed_jump(imp.dv, imp.theta, orbit)
        theta = imp.theta
    state = rd.stm_full(scenario.theta_f, theta, orbit) @ state

    diff = state - xft.vector
    thf = scenario.theta_f
    rho_f = rd.rho(thf, orbit.e)
    r_err = diff[:3] / rho_f
    v_err = orbit.k2 * (orbit.e * math.sin(thf) * diff[:3] + rho_f * diff[3:])
    units = scenario.units
    return TerminalError(
        position=float(np.linalg.norm(r_err)),
        velocity=float(np.linalg.norm(v_err)),
        position_scaled=float(np.linalg.norm(r_err) / units.length),
        velocity_scaled=float(np.linalg.norm(v_err) / units.velocity),
    )


def merge_adjacent_impulses(
    plan: ImpulsePlan,
    scenario: Scenario,
    max_gap_steps: int = 2,
    direction_tol_deg: float = 5.0,
) -> ImpulsePlan:
    """Collapse a burn spread over neighboring nodes into one impulse.

    Impulses within max_gap_steps grid nodes of each other whose
    directions agree within direction_tol_deg are summed and placed at
    the cost-weighted mean anomaly.  Off by default everywhere; the
    merged anomalies are generally not grid nodes.  The returned plan
    keeps the original raw arrays and total cost; terminal_error is
    cleared and should be re-verified.
    """
    cos_tol = math.cos(math.radians(direction_tol_deg))
    node_of = {float(th): k for k, th in enumerate(plan.raw_thetas)}
    groups: list[list[Impulse]] = []
    for imp in plan.impulses:
        if groups:
            prev = groups[-1][-1]
            gap = node_of.get(imp.theta, 0) - node_of.get(prev.theta, 0)
            vec = sum(i.dv for i in groups[-1])
            aligned = (
                float(vec @ imp.dv)
                >= cos_tol * np.linalg.norm(vec) * imp.magnitude
            )
            if gap <= max_gap_steps and aligned:
                groups[-1].append(imp)
                continue
        groups.append([imp])

    merged = []
    for group in groups:
        if len(group) == 1:
            merged.append(group[0])
            continue
        dv = sum(i.dv for i in group)
        weights = np.array([i.magnitude for i in group])
        theta = float(weights @ [i.theta for i in group] / weights.sum())
        merged.append(Impulse(theta=theta, t=float(time_from_true(theta, scenario.orbit)),
                              dv=dv, magnitude=float(np.linalg.norm(dv))))
    return ImpulsePlan(
        impulses=merged,
        total_dv=plan.total_dv,
        dropped_dv=plan.dropped_dv,
        n_impulses=len(merged),
        mesh_m=plan.mesh_m,
        extraction_tol=plan.extraction_tol,
        raw_thetas=plan.raw_thetas,
        raw_times=plan.raw_times,
        raw_dv=plan.raw_dv,
        raw_magnitudes=plan.raw_magnitudes,
    )


@dataclass(frozen=True)
class TrajectorySample:
    theta: float
    t: float
    state: RelativeState


def reconstruct_trajectory(
    plan: ImpulsePlan,
    scenario: Scenario,
    samples_per_segment: int = 32,
) -> list[TrajectorySample]:
    """Densely sampled physical trajectory between consecutive burn nodes.

    Impulse nodes appear twice, once with the incoming velocity and once
    with the outgoing one; positions agree, velocities jump by dv.
    """
    if samples_per_segment < 1:
        raise ValueError("samples_per_segment must be at least 1")
    orbit = scenario.orbit
    eps = 1e-12 * max(1.0, abs(scenario.theta_f))
    breaks = [scenario.theta0]
    jumps = {}
    for imp in plan.impulses:
        if imp.theta > breaks[-1] + eps and imp.theta < scenario.theta_f - eps:
            breaks.append(imp.theta)
        jumps[imp.theta] = _transformed_jump(imp.dv, imp.theta, orbit)
    breaks.append(scenario.theta_f)

    x0t, _ = transform_boundaries(scenario)
    state = x0t.vector.copy()
    samples: list[TrajectorySample] = []

    def emit(th, vec):
        rel = rd.from_transformed(rd.TransformedState.from_vector(vec), th, orbit)
        samples.append(TrajectorySample(theta=float(th), t=float(time_from_true(th, orbit)), state=rel))

    for th_a, th_b in zip(breaks[:-1], breaks[1:]):
        if abs(th_a - scenario.theta0) <= eps and th_a in jumps:
            # burn at departure
            emit(th_a, state)
            state[3:] += jumps.pop(th_a)
        pts = np.linspace(th_a, th_b, samples_per_segment + 1)
        for th in pts[:-1]:
            emit(th, rd.stm_full(th, th_a, orbit) @ state)
        state = rd.stm_full(th_b, th_a, orbit) @ state
        emit(th_b, state)
        jump = None
        for th_j in list(jumps):
            if abs(th_j - th_b) <= eps:
                jump = jumps.pop(th_j)
        if jump is not None:
            state[3:] += jump
            emit(th_b, state)
    return samples


@dataclass(frozen=True)
class InertialSample:
    theta: float
    t: float
    chaser: np.ndarray
    target: np.ndarray


def _perifocal_to_inertial(orbit: TargetOrbit) -> np.ndarray:
    co, so = math.cos(orbit.raan), math.sin(orbit.raan)
    ci, si = math.cos(orbit.i), math.sin(orbit.i)
    cw, sw = math.cos(orbit.argp), math.sin(orbit.argp)
    rz_raan = np.array([[co, -so, 0.0], [so, co, 0.0], [0.0, 0.0, 1.0]])
    rx_i = np.array([[1.0, 0.0, 0.0], [0.0, ci, -si], [0.0, si, ci]])
    rz_argp = np.array([[cw, -sw, 0.0], [sw, cw, 0.0], [0.0, 0.0, 1.0]])
    return rz_raan @ rx_i @ rz_argp


def to_inertial(samples: list[TrajectorySample], orbit: TargetOrbit) -> list[InertialSample]:
    """Inertial chaser/target positions for plotting.

    The rotating frame has x along-track, y opposite the orbit normal
    and z radial toward the central body.
    """
    rot = _perifocal_to_inertial(orbit)
    h_hat = rot @ np.array([0.0, 0.0, 1.0])
    out = []
    for s in samples:
        th = s.theta
        r_mag = orbit.p / rd.rho(th, orbit.e)
        r_hat = rot @ np.array([math.cos(th), math.sin(th), 0.0])
        t_hat = np.cross(h_hat, r_hat)
        target = r_mag * r_hat
        axes = np.column_stack([t_hat, -h_hat, -r_hat])
        chaser = target + axes @ s.state.r
        out.append(InertialSample(theta=th, t=s.t, chaser=chaser, target=target))
    return out


@dataclass(frozen=True)
class PlanResult:
    """One scenario solve end to end: problem, solution, extracted plan."""

    plan: Optional[ImpulsePlan]
    solution: ConicSolution
    grid: Grid
    problem: ConicProblem
    assembly_time: float


def plan_rendezvous(
    scenario: Scenario,
    mesh_m: Optional[int] = None,
    form: str = "condensed",
    tol: Optional[float] = None,
    settings: Optional[SolverSettings] = None,
    trace=None,
    grid: Optional[Grid] = None,
) -> PlanResult:
    """Transcribe, solve, extract and verify one scenario."""
    if grid is None:
        grid = build_grid(scenario, mesh_m if mesh_m is not None else scenario.mesh_m)
    t0 = time.perf_counter()
    problem = assemble_socp(scenario, grid, form=form)
    assembly_time = time.perf_counter() - t0
    sol = solve(problem, settings, trace=trace)
    plan = None
    if sol.status == "optimal":
        expanded = expand_solution(problem, sol, scenario, grid)
        plan = extract_impulses(expanded, grid, scenario, tol=tol)
        plan.terminal_error = verify_plan(plan, scenario)
    return PlanResult(plan=plan, solution=sol, grid=grid, problem=problem,
                      assembly_time=assembly_time)


@dataclass(frozen=True)
class MeshPoint:
    m: int
    total_dv: float
    n_impulses: int
    solve_time: float
    assembly_time: float
    iterations: int
    status: str


def mesh_sweep(scenario: Scenario, m_list, form: str = "condensed",
               tol: Optional[float] = None) -> list[MeshPoint]:
    """Independent solves over a list of mesh sizes, sorted by size.

    Failed meshes are reported with their status and NaN cost; the sweep
    continues.
    """
    rows = []
    for m in sorted(int(m) for m in m_list):
        try:
            res = plan_rendezvous(scenario, mesh_m=m, form=form, tol=tol)
            sol = res.solution
            if res.plan is not None:
                rows.append(MeshPoint(
                    m=m, total_dv=res.plan.total_dv, n_impulses=res.plan.n_impulses,
                    solve_time=sol.solve_time, assembly_time=res.assembly_time,
                    iterations=sol.iterations, status=sol.status,
                ))
            else:
                rows.append(MeshPoint(m=m, total_dv=math.nan, n_impulses=0,
                                      solve_time=sol.solve_time,
                                      assembly_time=res.assembly_time,
                                      iterations=sol.iterations, status=sol.status))
        except (ValueError, np.linalg.LinAlgError) as exc:
            rows.append(MeshPoint(m=m, total_dv=math.nan, n_impulses=0,
                                  solve_time=math.nan, assembly_time=math.nan,
                                  iterations=0, status=f"error: {exc}"))
    return rows


@dataclass(frozen=True)
class InnerNodeResult:
    theta2: float
    total_dv: float
    plan: ImpulsePlan
    scan_nodes: np.ndarray
    scan_costs: np.ndarray


def _three_node_cost(scenario: Scenario, theta2: float,
                     settings: Optional[SolverSettings]) -> tuple[float, PlanResult]:
    grid = grid_from_nodes(scenario, [scenario.theta0, theta2, scenario.theta_f])
    res = plan_rendezvous(scenario, grid=grid, settings=settings)
    if res.plan is None:
        return math.inf, res
    return res.plan.total_dv, res


def inner_node_search(scenario: Scenario, resolution: int = 100,
                      settings: Optional[SolverSettings] = None) -> InnerNodeResult:
    """Best interior burn anomaly for a three-node grid.

    Scans the open horizon at the given resolution, then refines the
    best candidate by golden-section to 1e-6 rad.
    """
    if resolution < 10:
        raise ValueError(f"resolution must be at least 10, got {resolution}")
    th0, thf = scenario.theta0, scenario.theta_f
    span = thf - th0
    cands = th0 + span * (np.arange(1, resolution + 1) / (resolution + 1))
    costs = np.array([_three_node_cost(scenario, th, settings)[0] for th in cands])
    best = int(np.argmin(costs))

    pad = 1e-9 * span
    lo = cands[best - 1] if best > 0 else th0 + pad
    hi = cands[best + 1] if best < resolution - 1 else thf - pad

    # golden-section on the bracket; the per-candidate cost is a solve
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1 = _three_node_cost(scenario, x1, settings)[0]
    f2 = _three_node_cost(scenario, x2, settings)[0]
    while (b - a) > 1e-6:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = _three_node_cost(scenario, x1, settings)[0]
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = _three_node_cost(scenario, x2, settings)[0]
    theta2 = 0.5 * (a + b)
    total, res = _three_node_cost(scenario, theta2, settings)
    return InnerNodeResult(theta2=float(theta2), total_dv=float(total),
                           plan=res.plan, scan_nodes=cands, scan_costs=costs)
