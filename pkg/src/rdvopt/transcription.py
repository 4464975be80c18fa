"""Discretize a rendezvous scenario into a second-order cone program.

The transfer window [theta0, thetaf] is sampled on an anomaly grid; an
impulse slot lives at every node and the dynamics between nodes are the
closed-form transition matrices.  Two equivalent formulations are built:

* condensed (default): intermediate states are eliminated through the
  transition-matrix chain, leaving only impulse and epigraph variables
  and one terminal equality block.
* full: one free state vector per node plus the node-to-node defect
  equalities, matching the discretized problem statement verbatim.

Internally everything is nondimensionalized by the semilatus rectum and
the inverse mean motion; for an already normalized scenario those scales
are unity and the scaling is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import relative_dynamics as rd
from .conic_solver import ConeSpec, ConicProblem, ConicSolution
from .kepler import TargetOrbit, time_from_true, true_from_time
from .relative_dynamics import RelativeState


@dataclass(frozen=True)
class UnitSystem:
    """Scales mapping internal nondimensional quantities to scenario units."""

    length: float
    time: float
    label: str = "km-s"

    @property
    def velocity(self) -> float:
        return self.length / self.time


@dataclass(frozen=True)
class Scenario:
    """Boundary states, target orbit and horizon of one transfer problem.

    Exactly one of duration (time units of the orbit) or thetaf
    (unwrapped true anomaly) defines the horizon.
    """

    name: str
    orbit: TargetOrbit
    x0: RelativeState
    xf: RelativeState
    duration: Optional[float] = None
    thetaf: Optional[float] = None
    planar: bool = False
    unit_label: str = "km-s"
    mesh_m: int = 257
    extraction_tol: float = 1e-5

    def __post_init__(self):
        if (self.duration is None) == (self.thetaf is None):
            raise ValueError("exactly one of duration / thetaf must be given")
        if self.duration is not None and not (self.duration > 0.0):
            raise ValueError(f"duration must be positive, got {self.duration}")
        if self.thetaf is not None and not (self.thetaf > self.orbit.theta0):
            raise ValueError("thetaf must exceed the orbit's initial anomaly")
        if not (np.all(np.isfinite(self.x0.vector)) and np.all(np.isfinite(self.xf.vector))):
            raise ValueError("boundary states must be finite")

    @property
    def theta0(self) -> float:
        return self.orbit.theta0

    @property
    def theta_f(self) -> float:
        if self.thetaf is not None:
            return self.thetaf
        return true_from_time(self.duration, self.orbit)

    @property
    def duration_seconds(self) -> float:
        if self.duration is not None:
            return self.duration
        return time_from_true(self.thetaf, self.orbit)

    @property
    def units(self) -> UnitSystem:
        return UnitSystem(length=self.orbit.p, time=1.0 / self.orbit.n, label=self.unit_label)

    @property
    def state_dim(self) -> int:
        return 4 if self.planar else 6

    @property
    def input_dim(self) -> int:
        return 2 if self.planar else 3


@dataclass(frozen=True)
class Grid:
    """Anomaly mesh with matching epoch-relative times and rho values."""

    nodes: np.ndarray
    times: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float))
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "rho", np.asarray(self.rho, dtype=float))
        if self.nodes.size < 2:
            raise ValueError("a grid needs at least two nodes")
        if not np.all(np.diff(self.nodes) > 0.0):
            raise ValueError("grid nodes must be strictly increasing")
        if np.any(self.rho <= 0.0):
            raise ValueError("rho must stay positive on the grid")

    @property
    def m(self) -> int:
        return self.nodes.size


def grid_from_nodes(scenario: Scenario, nodes) -> Grid:
    """Grid over an explicit node list; endpoints must be the horizon."""
    nodes = np.asarray(nodes, dtype=float)
    orbit = scenario.orbit
    times = np.array([time_from_true(th, orbit) for th in nodes])
    return Grid(nodes=nodes, times=times, rho=1.0 + orbit.e * np.cos(nodes))


def build_grid(scenario: Scenario, m: int) -> Grid:
    """Uniform anomaly grid with m nodes from theta0 to thetaf inclusive."""
    if m < 2:
        raise ValueError(f"mesh size must be at least 2, got {m}")
    return grid_from_nodes(scenario, np.linspace(scenario.theta0, scenario.theta_f, m))


def transform_boundaries(scenario: Scenario, grid: Optional[Grid] = None):
    """Boundary states in transformed coordinates at the horizon anomalies."""
    th0 = scenario.theta0 if grid is None else float(grid.nodes[0])
    thf = scenario.theta_f if grid is None else float(grid.nodes[-1])
    x0t = rd.to_transformed(scenario.x0, th0, scenario.orbit)
    xft = rd.to_transformed(scenario.xf, thf, scenario.orbit)
    return x0t, xft


def _reduce(vec6: np.ndarray, planar: bool) -> np.ndarray:
    return vec6[list(rd.IN_PLANE_IDX)] if planar else vec6


def _stm(scenario: Scenario, theta1: float, theta0: float) -> np.ndarray:
    if scenario.planar:
        return rd.stm_in_plane(theta1, theta0, scenario.orbit)
    return rd.stm_full(theta1, theta0, scenario.orbit)


def _actuation(state_dim: int, input_dim: int) -> np.ndarray:
    b = np.zeros((state_dim, input_dim))
    b[state_dim - input_dim:, :] = np.eye(input_dim)
    return b


def _node_weights(scenario: Scenario, grid: Grid) -> np.ndarray:
    # nondimensional cost coefficients: (k^2 / n) * rho_j
    orbit = scenario.orbit
    return (orbit.k2 / orbit.n) * grid.rho


def assemble_socp(scenario: Scenario, grid: Grid, form: str = "condensed") -> ConicProblem:
    """Build the cone program for the scenario on the given grid."""
    if form not in ("condensed", "full"):
        raise ValueError(f"form must be 'condensed' or 'full', got {form!r}")
    m = grid.m
    d = scenario.state_dim
    q = scenario.input_dim
    cone = q + 1
    bmat = _actuation(d, q)
    lscale = scenario.units.length
    x0t, xft = transform_boundaries(scenario, grid)
    xv0 = _reduce(x0t.vector, scenario.planar) / lscale
    xvf = _reduce(xft.vector, scenario.planar) / lscale
    w = _node_weights(scenario, grid)

    if form == "condensed":
        n = m * cone
        amat = np.zeros((d, n))
        cvec = np.zeros(n)
        sigma_idx = np.arange(m) * cone
        dv_idx = sigma_idx[:, None] + 1 + np.arange(q)[None, :]
        for j in range(m):
            phi_b = _stm(scenario, grid.nodes[-1], grid.nodes[j]) @ bmat
            amat[:, dv_idx[j]] = phi_b
        cvec[sigma_idx] = w
        bvec = xvf - _stm(scenario, grid.nodes[-1], grid.nodes[0]) @ xv0
        cones = ConeSpec(n_free=0, soc_dims=(cone,) * m)
    else:
        n_state = m * d
        n = n_state + m * cone
        sigma_idx = n_state + np.arange(m) * cone
        dv_idx = sigma_idx[:, None] + 1 + np.arange(q)[None, :]
        amat = np.zeros((d * (m + 1), n))
        bvec = np.zeros(d * (m + 1))
        cvec = np.zeros(n)
        cvec[sigma_idx] = w
        amat[:d, :d] = np.eye(d)
        bvec[:d] = xv0
        for j in range(m - 1):
            rows = slice(d * (j + 1), d * (j + 2))
            phi = _stm(scenario, grid.nodes[j + 1], grid.nodes[j])
            amat[rows, d * (j + 1):d * (j + 2)] = np.eye(d)
            amat[rows, d * j:d * (j + 1)] = -phi
            amat[rows, dv_idx[j]] = -phi @ bmat
        rows = slice(d * m, d * (m + 1))
        amat[rows, d * (m - 1):d * m] = np.eye(d)
        amat[rows, dv_idx[m - 1]] = bmat
        bvec[rows] = xvf
        cones = ConeSpec(n_free=n_state, soc_dims=(cone,) * m)

    var_map = {
        "form": form,
        "n_nodes": m,
        "state_dim": d,
        "input_dim": q,
        "sigma": sigma_idx,
        "dv": dv_idx,
        "weights": w,
    }
    return ConicProblem(c=cvec, A=amat, b=bvec, cones=cones, var_map=var_map)


@dataclass(frozen=True)
class ExpandedSolution:
    """Per-node states and impulses recovered from a solved program.

    States and impulses are in scaled transformed coordinates (length
    unit = semilatus rectum); x_minus/x_plus are the states just before
    and after each node's burn.
    """

    x_minus: np.ndarray
    x_plus: np.ndarray
    dv: np.ndarray
    sigma: np.ndarray


def expand_solution(
    problem: ConicProblem,
    sol: ConicSolution,
    scenario: Scenario,
    grid: Grid,
) -> ExpandedSolution:
    """Recover the state chain behind a solution of either formulation."""
    if sol.status not in ("optimal", "max_iters"):
        raise ValueError(f"cannot expand a solution with status {sol.status!r}")
    vm = problem.var_map
    m = vm["n_nodes"]
    d = vm["state_dim"]
    bmat = _actuation(d, vm["input_dim"])
    dv = sol.x[vm["dv"]]
    sigma = sol.x[vm["sigma"]]

    x_minus = np.empty((m, d))
    x_plus = np.empty((m, d))
    if vm["form"] == "full":
        for j in range(m):
            x_minus[j] = sol.x[d * j:d * (j + 1)]
    else:
        x0t, _ = transform_boundaries(scenario, grid)
        x_minus[0] = _reduce(x0t.vector, scenario.planar) / scenario.units.length
        for j in range(m - 1):
            phi = _stm(scenario, grid.nodes[j + 1], grid.nodes[j])
            x_minus[j + 1] = phi @ (x_minus[j] + bmat @ dv[j])
    for j in range(m):
        x_plus[j] = x_minus[j] + bmat @ dv[j]
    return ExpandedSolution(x_minus=x_minus, x_plus=x_plus, dv=dv, sigma=sigma)
