"""Primal-dual interior-point solver for second-order cone programs.

Solves the standard-form pair

    minimize    c'x                maximize    b'y
    subject to  A x = b            subject to  A'y + z = c
                x in K                          z in K*

where K is a product of one free block and second-order cones
(sigma, u) with sigma >= ||u||.  The algorithm is path-following on the
homogeneous self-dual embedding with Nesterov-Todd scaling and a
Mehrotra-style predictor-corrector, so no feasible starting point is
needed and infeasibility is detected through Farkas certificates.
Linear algebra is dense: a symmetric quasi-definite factorization of the
statically regularized KKT matrix, with a block-Schur fast path for
cone-only iterations at benign scalings, and iterative refinement
against the unregularized system on both paths.

Free variables sit natively in the KKT system; they are never split
into cone differences.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import lapack

_FRACTION_TO_BOUNDARY = 0.99
_REFINEMENT_ROUNDS = 4
_MIN_STEP = 1e-11


@dataclass(frozen=True)
class ConeSpec:
    """Ordered cone structure of the variable vector: free block, then SOCs."""

    n_free: int
    soc_dims: tuple[int, ...] = ()

    def __post_init__(self):
        if self.n_free < 0:
            raise ValueError("free block size must be nonnegative")
        if any(d < 2 for d in self.soc_dims):
            raise ValueError("second-order cones need dimension >= 2")
        object.__setattr__(self, "soc_dims", tuple(int(d) for d in self.soc_dims))

    @property
    def dim(self) -> int:
        return self.n_free + sum(self.soc_dims)

    @property
    def n_cones(self) -> int:
        return len(self.soc_dims)


@dataclass(frozen=True)
class ConicProblem:
    """Standard-form conic program data.

    var_map is free-form metadata for the builder (e.g. where each
    impulse lives in x); the solver ignores it.
    """

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    cones: ConeSpec
    var_map: Optional[dict] = None

    def __post_init__(self):
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float).reshape(-1))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).reshape(-1))
        a = np.asarray(self.A, dtype=float)
        if a.ndim != 2:
            raise ValueError("A must be a 2-D matrix")
        object.__setattr__(self, "A", a)
        if self.cones.dim != self.c.size or a.shape[1] != self.c.size:
            raise ValueError(
                f"dimension mismatch: cones dim {self.cones.dim}, "
                f"len(c) {self.c.size}, A columns {a.shape[1]}"
            )
        if a.shape[0] != self.b.size:
            raise ValueError(f"A has {a.shape[0]} rows but b has {self.b.size}")


@dataclass(frozen=True)
class SolverSettings:
    gap_tol: float = 1e-9
    feas_tol: float = 1e-9
    max_iters: int = 100
    static_reg: float = 1e-10

    def __post_init__(self):
        if min(self.gap_tol, self.feas_tol, self.static_reg) <= 0 or self.max_iters <= 0:
            raise ValueError("all solver settings must be positive")


@dataclass(frozen=True)
class Residuals:
    primal: float
    dual: float
    gap: float


@dataclass
class ConicSolution:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    status: str
    gap: float
    residuals: Residuals
    iterations: int
    solve_time: float
    objective: float = math.nan


def residuals(problem: ConicProblem, x, y, z) -> Residuals:
    """Relative primal/dual residuals and duality gap of a candidate triple."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    z = np.asarray(z, dtype=float).reshape(-1)
    n, p = problem.c.size, problem.b.size
    if x.size != n or z.size != n or y.size != p:
        raise ValueError(
            f"dimension mismatch: expected x,z of size {n} and y of size {p}, "
            f"got {x.size}, {z.size}, {y.size}"
        )
    pcost = float(problem.c @ x)
    primal = np.linalg.norm(problem.A @ x - problem.b) / (1.0 + np.linalg.norm(problem.b))
    dual = np.linalg.norm(problem.A.T @ y + z - problem.c) / (1.0 + np.linalg.norm(problem.c))
    gap = abs(pcost - float(problem.b @ y)) / (1.0 + abs(pcost))
    return Residuals(primal=float(primal), dual=float(dual), gap=float(gap))


# -- batched second-order cone algebra -------------------------------------
#
# Cone blocks of equal dimension are processed together as (g, d) arrays.


class _ConeLayout:
    def __init__(self, spec: ConeSpec):
        self.n_free = spec.n_free
        self.dims = spec.soc_dims
        starts = np.cumsum([spec.n_free] + list(spec.soc_dims[:-1])) if spec.soc_dims else []
        self.index = {}
        for d in sorted(set(spec.soc_dims)):
            s = np.array([st for st, dd in zip(starts, spec.soc_dims) if dd == d])
            self.index[d] = s[:, None] + np.arange(d)[None, :]

    def gather(self, x: np.ndarray) -> dict:
        return {d: x[idx] for d, idx in self.index.items()}

    def scatter_into(self, x: np.ndarray, blocks: dict):
        for d, idx in self.index.items():
            x[idx] = blocks[d]


def _jdet(u: np.ndarray) -> np.ndarray:
    return u[:, 0] ** 2 - np.sum(u[:, 1:] ** 2, axis=1)


def _jprod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty_like(a)
    out[:, 0] = np.sum(a * b, axis=1)
    out[:, 1:] = a[:, :1] * b[:, 1:] + b[:, :1] * a[:, 1:]
    return out


def _jsolve(lam: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Solve lam o w = d for w (inverse of the arrow operator of lam)."""
    det = _jdet(lam)
    out = np.empty_like(d)
    out[:, 0] = (lam[:, 0] * d[:, 0] - np.sum(lam[:, 1:] * d[:, 1:], axis=1)) / det
    out[:, 1:] = (d[:, 1:] - out[:, :1] * lam[:, 1:]) / lam[:, :1]
    return out


def _nt_scaling(u: np.ndarray, v: np.ndarray):
    """Nesterov-Todd scaling point for interior primal/dual cone blocks.

    Returns (eta, wbar) with W = eta * Wbar and W v = W^-1 u = lambda.
    """
    du = _jdet(u)
    dv = _jdet(v)
    ubar = u / np.sqrt(du)[:, None]
    vbar = v / np.sqrt(dv)[:, None]
    gamma = np.sqrt(0.5 * (1.0 + np.sum(ubar * vbar, axis=1)))
    wbar = ubar.copy()
    wbar[:, 0] += vbar[:, 0]
    wbar[:, 1:] -= vbar[:, 1:]
    wbar /= (2.0 * gamma)[:, None]
    eta = (du / dv) ** 0.25
    return eta, wbar


def _wbar_apply(wbar: np.ndarray, q: np.ndarray, inverse: bool = False) -> np.ndarray:
    w1 = -wbar[:, 1:] if inverse else wbar[:, 1:]
    w0 = wbar[:, 0]
    dot = np.sum(w1 * q[:, 1:], axis=1)
    out = np.empty_like(q)
    out[:, 0] = w0 * q[:, 0] + dot
    out[:, 1:] = q[:, 1:] + (q[:, 0] + dot / (1.0 + w0))[:, None] * w1
    return out


def _two_wwt_minus_j(w: np.ndarray) -> np.ndarray:
    """2 w w' - J as (g, d, d) blocks; equals Wbar^2 when w = wbar."""
    g, d = w.shape
    out = 2.0 * w[:, :, None] * w[:, None, :]
    di = np.arange(d)
    out[:, di, di] += 1.0
    out[:, 0, 0] -= 2.0
    return out


def _w2_blocks(eta: np.ndarray, wbar: np.ndarray) -> np.ndarray:
    """Dense W^2 blocks (exact closed form, no inversion)."""
    return (eta ** 2)[:, None, None] * _two_wwt_minus_j(wbar)


def _w2inv_blocks(eta: np.ndarray, wbar: np.ndarray) -> np.ndarray:
    """Dense W^-2 blocks via the reflected scaling vector J wbar."""
    wtil = wbar.copy()
    wtil[:, 1:] *= -1.0
    return _two_wwt_minus_j(wtil) / (eta ** 2)[:, None, None]


def _max_step(u: np.ndarray, du: np.ndarray) -> float:
    """Largest alpha with u + alpha*du in the cone, for interior u (may be inf).

    The boundary crossing is the smallest positive root of the quadratic
    det(u + alpha*du) = 0; det(u) > 0 guarantees no root at zero.
    """
    a = _jdet(du)
    bq = 2.0 * (u[:, 0] * du[:, 0] - np.sum(u[:, 1:] * du[:, 1:], axis=1))
    cq = _jdet(u)
    if a.size == 0:
        return math.inf
    out = np.full(a.shape, np.inf)
    lin = np.abs(a) < 1e-300
    m = lin & (bq < 0.0)
    out[m] = -cq[m] / bq[m]
    disc = bq * bq - 4.0 * a * cq
    real = ~lin & (disc >= 0.0)
    sq = np.sqrt(np.where(disc >= 0.0, disc, 0.0))
    t = np.where(bq != 0.0, -0.5 * (bq + np.copysign(sq, bq)), 0.5 * sq)
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(real & (a != 0.0), t / a, np.inf)
        r2 = np.where(real & (t != 0.0), cq / t, np.inf)
    r1 = np.where(r1 > 0.0, r1, np.inf)
    r2 = np.where(r2 > 0.0, r2, np.inf)
    out = np.minimum(out, np.minimum(r1, r2))
    return float(np.min(out))


# -- main solver ------------------------------------------------------------


class _DenseKKT:
    """Regularized symmetric quasi-definite factorization with refinement.

    Used whenever free variables sit in the KKT system (the full
    formulation); handles the indefinite block structure natively.
    """

    def __init__(self, h: np.ndarray, a: np.ndarray, reg: float):
        n = h.shape[0]
        p = a.shape[0]
        k = np.zeros((n + p, n + p))
        k[:n, :n] = -h
        k[n:, :n] = a
        k[:n, n:] = a.T
        self.k = k
        kreg = k.copy()
        di = np.arange(n + p)
        kreg[di[:n], di[:n]] -= reg
        kreg[di[n:], di[n:]] += reg
        for attempt in range(3):
            ldu, ipiv, info = lapack.dsytrf(kreg, lower=1)
            if info == 0:
                break
            # singular pivot: strengthen the regularization and retry
            kreg[di[:n], di[:n]] -= reg * 10.0 ** (2 * attempt + 2)
            kreg[di[n:], di[n:]] += reg * 10.0 ** (2 * attempt + 2)
        else:
            raise np.linalg.LinAlgError("KKT factorization failed")
        self._ldu = ldu
        self._ipiv = ipiv

    def _backsolve(self, rhs2: np.ndarray) -> np.ndarray:
        sol, info = lapack.dsytrs(self._ldu, self._ipiv, rhs2, lower=1)
        if info != 0:
            raise np.linalg.LinAlgError("KKT backsolve failed")
        return sol

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs2 = rhs if rhs.ndim == 2 else rhs[:, None]
        sol = self._backsolve(rhs2)
        scale = 1.0 + float(np.max(np.abs(rhs2)))
        best = math.inf
        for _ in range(_REFINEMENT_ROUNDS):
            resid = rhs2 - self.k @ sol
            rnorm = float(np.max(np.abs(resid)))
            if rnorm <= 1e-14 * scale or rnorm >= best:
                break
            best = rnorm
            sol = sol + self._backsolve(resid)
        return sol if rhs.ndim == 2 else sol[:, 0]


class _SchurKKT:
    """Block elimination for cone-only problems (no free variables).

    The (1,1) block is then block-diagonal and positive definite, so the
    system reduces to a dense p x p Schur complement on the multipliers;
    per-iteration cost is linear in the number of cones.  Algebraically
    identical to the quasi-definite factorization, including the static
    regularization and the refinement against the unregularized system.
    """

    def __init__(self, w2: dict, w2inv: dict, layout: "_ConeLayout", a: np.ndarray, reg: float):
        self.layout = layout
        self.a = a
        n = a.shape[1]
        p = a.shape[0]
        self.n = n
        self.w2inv = w2inv
        self.hinv = w2  # exact closed-form inverse of H = W^-2
        hinv_at = np.empty((n, p))
        for d, idx in layout.index.items():
            hinv_at[idx.reshape(-1)] = np.einsum(
                "gij,gjk->gik", w2[d], a[:, idx].transpose(1, 2, 0)
            ).reshape(-1, p)
        schur = a @ hinv_at + reg * np.eye(p)
        self._chol, info = lapack.dpotrf(schur, lower=1)
        if info != 0:
            raise np.linalg.LinAlgError("Schur factorization failed")

    def _solve_once(self, r1: np.ndarray, r2: np.ndarray):
        t = self._hinv_apply(r1)
        rhs = r2 + self.a @ t
        dy, info = lapack.dpotrs(self._chol, rhs, lower=1)
        if info != 0:
            raise np.linalg.LinAlgError("Schur backsolve failed")
        dx = self._hinv_apply(self.a.T @ dy - r1)
        return dx, dy

    def _hinv_apply(self, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        for d, idx in self.layout.index.items():
            blk = v[idx] if v.ndim == 1 else v[idx.reshape(-1)].reshape(idx.shape[0], d, -1)
            if v.ndim == 1:
                out[idx] = np.einsum("gij,gj->gi", self.hinv[d], blk)
            else:
                out[idx.reshape(-1)] = np.einsum("gij,gjk->gik", self.hinv[d], blk).reshape(-1, v.shape[1])
        return out

    def _h_apply(self, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        for d, idx in self.layout.index.items():
            blk = v[idx] if v.ndim == 1 else v[idx.reshape(-1)].reshape(idx.shape[0], d, -1)
            if v.ndim == 1:
                out[idx] = np.einsum("gij,gj->gi", self.w2inv[d], blk)
            else:
                out[idx.reshape(-1)] = np.einsum("gij,gjk->gik", self.w2inv[d], blk).reshape(-1, v.shape[1])
        return out

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        one_dim = rhs.ndim == 1
        rhs2 = rhs[:, None] if one_dim else rhs
        n = self.n
        dx, dy = self._solve_once(rhs2[:n], rhs2[n:])
        scale = 1.0 + float(np.max(np.abs(rhs2)))
        best = math.inf
        for _ in range(_REFINEMENT_ROUNDS):
            res1 = rhs2[:n] - (-self._h_apply(dx) + self.a.T @ dy)
            res2 = rhs2[n:] - self.a @ dx
            rnorm = max(float(np.max(np.abs(res1))), float(np.max(np.abs(res2), initial=0.0)))
            if rnorm <= 1e-14 * scale or rnorm >= best:
                break
            best = rnorm
            cx, cy = self._solve_once(res1, res2)
            dx = dx + cx
            dy = dy + cy
        sol = np.vstack([dx, dy])
        return sol[:, 0] if one_dim else sol


def solve(
    problem: ConicProblem,
    settings: SolverSettings | None = None,
    trace: Optional[Callable[[dict], None]] = None,
) -> ConicSolution:
    """Solve a conic program; deterministic for identical inputs.

    On status "optimal", (x, y, z) is the scaled primal-dual solution.
    On "primal_infeasible", (y, z) is a Farkas certificate normalized to
    b'y = 1; on "dual_infeasible", x is a ray normalized to c'x = -1.
    """
    st = settings or SolverSettings()
    a_mat, b, c = problem.A, problem.b, problem.c
    n, p = c.size, b.size
    layout = _ConeLayout(problem.cones)
    nf = layout.n_free
    ncones = problem.cones.n_cones
    nu = ncones + 1

    t_start = time.perf_counter()

    x = np.zeros(n)
    z = np.zeros(n)
    for idx in layout.index.values():
        x[idx[:, 0]] = 1.0
        z[idx[:, 0]] = 1.0
    y = np.zeros(p)
    tau, kappa = 1.0, 1.0

    norm_b = np.linalg.norm(b)
    norm_c = np.linalg.norm(c)

    def metrics():
        xh = x / tau
        yh = y / tau
        zh = z / tau
        pcost = float(c @ xh)
        dcost = float(b @ yh)
        pres = np.linalg.norm(a_mat @ xh - b) / (1.0 + norm_b)
        dres = np.linalg.norm(a_mat.T @ yh + zh - c) / (1.0 + norm_c)
        gap = abs(pcost - dcost) / (1.0 + abs(pcost))
        return pres, dres, gap, pcost, dcost

    def finish(status, iters, pres, dres, gap, scale=None):
        s = scale if scale is not None else tau
        res = Residuals(primal=float(pres), dual=float(dres), gap=float(gap))
        return ConicSolution(
            x=x / s, y=y / s, z=z / s, status=status, gap=float(gap),
            residuals=res, iterations=iters,
            solve_time=time.perf_counter() - t_start,
            objective=float(c @ x / s),
        )

    stalls = 0
    for it in range(st.max_iters + 1):
        r_p = a_mat @ x - b * tau
        r_d = -a_mat.T @ y - z + c * tau
        r_g = -float(c @ x) + float(b @ y) - kappa

        uu = layout.gather(x)
        vv = layout.gather(z)
        comp = sum(float(np.sum(uu[d] * vv[d])) for d in uu) + tau * kappa
        mu = comp / nu

        pres, dres, gap, pcost, dcost = metrics()
        if trace is not None:
            trace({"iter": it, "mu": mu, "pres": pres, "dres": dres,
                   "gap": gap, "tau": tau, "kappa": kappa})

        if not all(map(math.isfinite, (pres, dres, gap, mu, tau, kappa))):
            return finish("numerical_failure", it, pres, dres, gap)
        if pres <= st.feas_tol and dres <= st.feas_tol and gap <= st.gap_tol:
            return finish("optimal", it, pres, dres, gap)

        by = float(b @ y)
        cx = float(c @ x)
        if by > 0.0:
            if np.linalg.norm(a_mat.T @ y + z) / by <= st.feas_tol * (1.0 + norm_c):
                return finish("primal_infeasible", it, pres, dres, gap, scale=by)
        if cx < 0.0:
            if np.linalg.norm(a_mat @ x) / (-cx) <= st.feas_tol * (1.0 + norm_b):
                return finish("dual_infeasible", it, pres, dres, gap, scale=-cx)

        if it == st.max_iters:
            return finish("max_iters", it, pres, dres, gap)

        eta = {}
        wbar = {}
        lam = {}
        w2 = {}
        w2inv = {}
        for d in uu:
            if np.any(_jdet(uu[d]) <= 0.0) or np.any(_jdet(vv[d]) <= 0.0):
                # iterate pinned to the cone boundary at rounding level:
                # no further centering is possible, return best effort
                return finish("max_iters", it, pres, dres, gap)
            eta[d], wbar[d] = _nt_scaling(uu[d], vv[d])
            lam[d] = eta[d][:, None] * _wbar_apply(wbar[d], vv[d])
            w2[d] = _w2_blocks(eta[d], wbar[d])
            w2inv[d] = _w2inv_blocks(eta[d], wbar[d])

        # The Schur path costs O(cones) per iteration but loses ~cond(W)^2
        # digits, so it is used only while the scalings are benign; near the
        # boundary the quasi-definite factorization takes over.
        scaling_cond = max(
            (float(np.max(wbar[d][:, 0])) for d in wbar), default=1.0
        )
        try:
            if nf == 0 and ncones > 0 and scaling_cond < 100.0:
                kkt = _SchurKKT(w2, w2inv, layout, a_mat, st.static_reg)
            else:
                h = np.zeros((n, n))
                for d, idx in layout.index.items():
                    for k_c in range(idx.shape[0]):
                        s0 = idx[k_c, 0]
                        h[s0:s0 + d, s0:s0 + d] = w2inv[d][k_c]
                kkt = _DenseKKT(h, a_mat, st.static_reg)
            sol2 = kkt.solve(np.concatenate([c, b]))
        except np.linalg.LinAlgError:
            # factorization breakdown with finite iterates: let the caller
            # see the best effort rather than a hard failure
            return finish("max_iters", it, pres, dres, gap)
        dx2, dy2 = sol2[:n], sol2[n:]

        def direction(gamma, d_c, d_tk):
            """Newton direction targeting residual reduction factor (gamma - 1)."""
            gvec = np.zeros(n)
            wiv = {d: _wbar_apply(wbar[d], _jsolve(lam[d], d_c[d]), inverse=True) / eta[d][:, None]
                   for d in d_c}
            layout.scatter_into(gvec, wiv)
            rd_hat = (1.0 - gamma) * r_d - gvec
            rp_hat = (gamma - 1.0) * r_p
            sol1 = kkt.solve(np.concatenate([rd_hat, rp_hat]))
            dx1, dy1 = sol1[:n], sol1[n:]
            den = kappa / tau - float(c @ dx2) + float(b @ dy2)
            num = (gamma - 1.0) * r_g + d_tk / tau + float(c @ dx1) - float(b @ dy1)
            dtau = num / den
            dx = dx1 + dtau * dx2
            dy = dy1 + dtau * dy2
            du_b = layout.gather(dx)
            dv_b = {d: wiv[d] - np.einsum("gij,gj->gi", w2inv[d], du_b[d])
                    for d in du_b}
            dkappa = (d_tk - kappa * dtau) / tau
            return dx, dy, dtau, du_b, dv_b, dkappa

        def step_limit(du_b, dv_b, dtau, dkappa):
            amax = math.inf
            for d in du_b:
                amax = min(amax, _max_step(uu[d], du_b[d]), _max_step(vv[d], dv_b[d]))
            if dtau < 0.0:
                amax = min(amax, -tau / dtau)
            if dkappa < 0.0:
                amax = min(amax, -kappa / dkappa)
            return amax

        # predictor (affine direction, sigma = 0)
        d_c_aff = {d: -_jprod(lam[d], lam[d]) for d in uu}
        _, _, dtaua, dua, dva, dkappaa = direction(0.0, d_c_aff, -tau * kappa)
        alpha_aff = min(1.0, step_limit(dua, dva, dtaua, dkappaa))

        comp_aff = sum(
            float(np.sum((uu[d] + alpha_aff * dua[d]) * (vv[d] + alpha_aff * dva[d])))
            for d in uu
        ) + (tau + alpha_aff * dtaua) * (kappa + alpha_aff * dkappaa)
        sigma = min(1.0, max(0.0, (max(comp_aff, 0.0) / comp) ** 3))

        # corrector (combined direction with Mehrotra second-order term)
        d_c = {}
        for d in uu:
            corr = _jprod(
                _wbar_apply(wbar[d], dua[d], inverse=True) / eta[d][:, None],
                eta[d][:, None] * _wbar_apply(wbar[d], dva[d]),
            )
            target = -_jprod(lam[d], lam[d]) - corr
            target[:, 0] += sigma * mu
            d_c[d] = target
        d_tk = sigma * mu - tau * kappa - dtaua * dkappaa
        dx, dy, dtau, du_b, dv_b, dkappa = direction(sigma, d_c, d_tk)

        alpha = min(1.0, _FRACTION_TO_BOUNDARY * step_limit(du_b, dv_b, dtau, dkappa))
        if trace is not None:
            trace({"iter": it, "sigma": sigma, "alpha_aff": alpha_aff, "alpha": alpha})
        if alpha <= _MIN_STEP:
            stalls += 1
            if stalls >= 2:
                return finish("max_iters", it, pres, dres, gap)
        else:
            stalls = 0

        x += alpha * dx
        y += alpha * dy
        for d, idx in layout.index.items():
            z[idx] += alpha * dv_b[d]
        tau += alpha * dtau
        kappa += alpha * dkappa

    # not reached: loop returns at it == max_iters
    raise AssertionError("unreachable")
