"""Primal-dual log-barrier interior-point solver for the continuous relaxation.

Problems have a smooth (possibly nonconvex) objective and only linear
constraints::

    min f(p)  s.t.  G p <= h,  lo <= p <= hi,  sum(p[g]) = t_g for disjoint groups g

Branching fixes some variables; those are substituted out before solving.
Iterates stay strictly feasible: inequality slacks ``s = h - G p`` and bound
distances are kept positive by a fraction-to-boundary rule, and equality
groups are preserved because every step is projected onto their null space.
The Newton system of the barrier subproblem is solved by projected
preconditioned conjugate gradients; negative curvature is handled by
diagonal regularisation and finally a steepest-descent fallback.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .transform import Assignment, MinlpProblem

OPTIMAL, INFEASIBLE, ITERATION_LIMIT = "optimal", "infeasible", "iteration_limit"
DENSE_LIMIT = 400  # reduced systems up to this size use dense matrix products


@dataclass(frozen=True)
class IpmParams:
    kkt_tolerance: float = 1e-8
    feasibility_tolerance: float = 1e-8
    gamma0: float = 0.1
    gamma_factor: float = 0.2
    gamma_min: float = 1e-9
    max_outer: int = 100
    max_inner: int = 60
    max_cg: int = 200
    cg_tolerance: float = 1e-10
    multistarts: int = 3
    fraction_to_boundary: float = 0.995
    seed: int = 0
    primal_multipliers: bool = False  # multipliers tied to gamma / distance after every step

    def __post_init__(self):
        if not (0 < self.gamma_factor < 1 and self.gamma0 > 0):
            raise ValueError("need gamma0 > 0 and 0 < gamma_factor < 1")
        if not 0 < self.fraction_to_boundary < 1:
            raise ValueError("fraction_to_boundary must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class NlpData:
    """Smooth objective with linear inequality, bound and group-sum constraints."""

    fun: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], sp.spmatrix]
    G: sp.csr_matrix
    h: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    groups: tuple[np.ndarray, ...] = ()
    targets: np.ndarray = field(default_factory=lambda: np.zeros(0))
    scale: np.ndarray | None = None  # typical magnitude of each variable
    objective_scale: float = 1.0  # fun/grad/hess are the true objective divided by this

    @property
    def n(self) -> int:
        return len(self.lower)


def nlp_from_problem(problem: MinlpProblem) -> NlpData:
    """The relaxation with its objective divided by the empty-cache delay.

    Normalizing makes the barrier schedule independent of the instance's
    delay magnitude; multipliers and KKT residuals refer to this scaled form.
    """
    G = sp.vstack([problem.capacity_matrix, problem.selection_matrix]).tocsr()
    h = np.concatenate([problem.scenario.capacities, problem.selection_rhs])
    lo = np.zeros(problem.nvar)
    hi = np.concatenate([np.ones(problem.n_binary), np.full(problem.nz, np.inf)])
    groups = tuple(problem.nx + g for g in problem.groups)
    targets = np.array([len(g) - 1.0 for g in groups])
    zscale = np.ones(problem.N * problem.I)
    np.maximum.at(zscale, problem.y_node * problem.I + problem.y_content,
                  problem.transfer * problem.big_m)
    scale = np.concatenate([np.ones(problem.n_binary), zscale])
    sc = problem.scenario
    ref = float((sc.weights * sc.server_delay).sum())
    ref = ref if ref > 0 else 1.0
    return NlpData(lambda p: problem.objective(p) / ref, lambda p: problem.gradient(p) / ref,
                   lambda p: problem.hessian(p) / ref, G, h, lo, hi, groups, targets, scale, ref)


@dataclass(frozen=True, eq=False)
class Multipliers:
    ineq: np.ndarray  # one per row of G
    lower: np.ndarray  # one per variable (0 where the bound is infinite)
    upper: np.ndarray


@dataclass(frozen=True, eq=False)
class RelaxedSolution:
    point: np.ndarray
    objective: float
    kkt_residual: float
    status: str
    multipliers: Multipliers | None = None
    assignment: Assignment | None = None
    iterations: int = 0
    start: str = ""
    others: tuple[np.ndarray, ...] = ()  # end points of the losing starts


class BarrierProblem:
    """Relaxation restricted to the free variables left by a set of fixings.

    Construction runs an exact presolve on the constraint structure: empty
    capacity rows force their free variables to the lower bound and
    group-sum targets equal to 0 or to the free count force the group.
    Anything left over is known to have a strictly interior point.
    """

    def __init__(self, nlp: NlpData, fixings: Mapping[int, float] | None = None):
        self.nlp = nlp
        self.infeasible_reason: str | None = None
        n = nlp.n
        fixed = np.full(n, np.nan)
        for k, v in (fixings or {}).items():
            if not 0 <= k < n:
                raise IndexError(f"fixing of unknown variable {k}")
            if not nlp.lower[k] <= v <= nlp.upper[k]:
                raise ValueError(f"fixing {k}={v} outside its bounds")
            fixed[k] = float(v)
        self._presolve(fixed)

    # -- presolve ---------------------------------------------------------------
    def _presolve(self, fixed: np.ndarray):
        nlp = self.nlp
        G = nlp.G.tocsr()
        tol = 1e-12
        changed = True
        while changed and self.infeasible_reason is None:
            changed = False
            for g, t in zip(nlp.groups, nlp.targets):
                isfree = np.isnan(fixed[g])
                rest = t - np.nansum(fixed[g])
                k = int(isfree.sum())
                if rest < -tol or rest > k + tol:
                    self.infeasible_reason = "group sum out of reach"
                    break
                if k and (abs(rest) <= tol or abs(rest - k) <= tol):
                    fixed[g[isfree]] = 0.0 if abs(rest) <= tol else 1.0
                    changed = True
            for r in range(G.shape[0]):
                cols = G.indices[G.indptr[r]:G.indptr[r + 1]]
                vals = G.data[G.indptr[r]:G.indptr[r + 1]]
                isfree = np.isnan(fixed[cols])
                rest = nlp.h[r] - vals[~isfree] @ fixed[cols[~isfree]]
                scale = max(1.0, abs(nlp.h[r]))
                if not isfree.any():
                    if rest < -1e-9 * scale:
                        self.infeasible_reason = f"constraint row {r} violated by fixings"
                        break
                    continue
                fv = vals[isfree]
                fl = nlp.lower[cols[isfree]]
                if np.all(fv > 0) and np.all(np.isfinite(fl)):
                    slack = rest - fv @ fl
                    if slack < -1e-9 * scale:
                        self.infeasible_reason = f"constraint row {r} cannot be met"
                        break
                    if slack <= 1e-9 * scale:
                        fixed[cols[isfree]] = fl
                        changed = True
        self.fixed_values = fixed
        self.free = np.flatnonzero(np.isnan(fixed))
        base = np.where(np.isnan(fixed), 0.0, fixed)
        self.base = base
        Gf = G[:, self.free].tocsr()
        # rows without free variables were checked above and carry no barrier term
        self.rows = np.flatnonzero(np.diff(Gf.indptr) > 0)
        self.G = Gf[self.rows]
        self.h = (nlp.h - G @ base)[self.rows]
        self.lo = nlp.lower[self.free]
        self.hi = nlp.upper[self.free]
        pos = -np.ones(nlp.n, dtype=int)
        pos[self.free] = np.arange(len(self.free))
        groups, targets = [], []
        for g, t in zip(nlp.groups, nlp.targets):
            gi = pos[g]
            gi = gi[gi >= 0]
            if len(gi):
                groups.append(gi)
                targets.append(t - base[g].sum())
        self.groups = groups
        self.targets = np.array(targets)
        self.group_of = -np.ones(len(self.free), dtype=int)
        for k, g in enumerate(groups):
            self.group_of[g] = k
        self.has_lo = np.isfinite(self.lo)
        self.has_hi = np.isfinite(self.hi)
        sc = np.ones(nlp.n) if nlp.scale is None else np.asarray(nlp.scale, dtype=float)
        self.scale = sc[self.free]
        self._delta = 0.0

    @property
    def infeasible(self) -> bool:
        return self.infeasible_reason is not None

    @property
    def nfree(self) -> int:
        return len(self.free)

    # -- maps between reduced and full space -----------------------------------
    def full(self, q: np.ndarray) -> np.ndarray:
        p = self.base.copy()
        p[self.free] = q
        return p

    def reduce(self, p: np.ndarray) -> np.ndarray:
        return np.asarray(p, dtype=float)[self.free].copy()

    def f(self, q):
        return self.nlp.fun(self.full(q))

    def df(self, q):
        return self.nlp.grad(self.full(q))[self.free]

    def d2f(self, q):
        H = sp.csr_matrix(self.nlp.hess(self.full(q)))
        return H[self.free][:, self.free]

    def slack(self, q):
        return self.h - self.G @ q

    # -- barrier ------------------------------------------------------------------
    def barrier_value(self, q: np.ndarray, gamma: float) -> float:
        s = self.slack(q)
        dl = q[self.has_lo] - self.lo[self.has_lo]
        du = self.hi[self.has_hi] - q[self.has_hi]
        if np.any(s <= 0) or np.any(dl <= 0) or np.any(du <= 0):
            return np.inf
        return self.f(q) - gamma * (np.log(s).sum() + np.log(dl).sum() + np.log(du).sum())

    def barrier_gradient(self, q: np.ndarray, gamma: float) -> np.ndarray:
        s = self.slack(q)
        g = self.df(q) + self.G.T @ (gamma / s)
        g[self.has_lo] -= gamma / (q[self.has_lo] - self.lo[self.has_lo])
        g[self.has_hi] += gamma / (self.hi[self.has_hi] - q[self.has_hi])
        return g

    def project(self, v: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
        """Project onto {d : sum(d[g]) = 0 for every group} (in the metric diag(1/weights))."""
        if not self.groups:
            return v.copy()
        w = np.ones_like(v) if weights is None else weights
        out = v.copy()
        k = self.group_of
        m = k >= 0
        num = np.bincount(k[m], weights=v[m], minlength=len(self.groups))
        den = np.bincount(k[m], weights=w[m], minlength=len(self.groups))
        out[m] -= (num / den)[k[m]] * w[m]
        return out

    def group_correction(self, q: np.ndarray) -> np.ndarray:
        """Even shift per group that restores its target sum."""
        out = np.zeros_like(q)
        for g, t in zip(self.groups, self.targets):
            out[g] = (t - q[g].sum()) / len(g)
        return out

    def stationarity(self, q: np.ndarray, mult: Multipliers) -> np.ndarray:
        r = self.df(q) + self.G.T @ mult.ineq - mult.lower + mult.upper
        return self.project(r)

    def kkt(self, q: np.ndarray, mult: Multipliers, gamma: float = 0.0) -> float:
        """Max-norm of projected stationarity, primal infeasibility and sigma*lambda - gamma."""
        parts = [0.0]
        if self.nfree:
            parts.append(np.abs(self.stationarity(q, mult)).max())
        s = self.slack(q)
        if len(s):
            parts.append(np.maximum(-s, 0).max())
            parts.append(np.abs(s * mult.ineq - gamma).max())
        dl = q[self.has_lo] - self.lo[self.has_lo]
        du = self.hi[self.has_hi] - q[self.has_hi]
        if len(dl):
            parts.append(np.maximum(-dl, 0).max())
            parts.append(np.abs(dl * mult.lower[self.has_lo] - gamma).max())
        if len(du):
            parts.append(np.maximum(-du, 0).max())
            parts.append(np.abs(du * mult.upper[self.has_hi] - gamma).max())
        if self.groups:
            parts.append(max(abs(q[g].sum() - t) for g, t in zip(self.groups, self.targets)))
        return float(max(parts))

    # -- Newton step ----------------------------------------------------------------
    def newton_matrix(self, q: np.ndarray, mult: Multipliers) -> sp.csr_matrix:
        s = self.slack(q)
        D = sp.diags(mult.ineq / s)
        diag = np.zeros(self.nfree)
        diag[self.has_lo] += mult.lower[self.has_lo] / (q[self.has_lo] - self.lo[self.has_lo])
        diag[self.has_hi] += mult.upper[self.has_hi] / (self.hi[self.has_hi] - q[self.has_hi])
        W = self.d2f(q) + (self.G.T @ D @ self.G) + sp.diags(diag)
        return sp.csr_matrix(W)

    def quadratic_step(self, q: np.ndarray, mult: Multipliers, gamma: float,
                       params: IpmParams = IpmParams()):
        """Minimiser of the local quadratic model of the barrier subproblem.

        Returns the primal step, the implied slack step ``-G dq`` and the
        largest step length allowed by the fraction-to-boundary rule.
        """
        g = self.barrier_gradient(q, gamma)
        W = self.newton_matrix(q, mult)
        dq, _ = self._solve_projected(W, g, params)
        ds = -(self.G @ dq)
        return dq, ds, self.max_step(q, dq, params.fraction_to_boundary)

    def _solve_projected(self, W, g, params: IpmParams):
        """Descent direction from projected CG with inertia correction.

        A shift ``delta * diag(1/scale^2)`` (identity in scaled variables) is
        added and increased until CG sees only positive curvature; if that
        never happens the scaled steepest-descent direction is used.
        """
        if self.nfree == 0:
            return np.zeros(0), CONVERGED
        shift = 1.0 / self.scale ** 2
        if self.nfree <= DENSE_LIMIT:
            W = W.toarray()  # sparse products cost more than dense ones at this size
        # start from a fraction of the last successful shift (zero first)
        delta = 0.0 if self._delta == 0 else max(1e-4, self._delta / 10.0)
        for _ in range(20):
            if not delta:
                Wd = W
            elif isinstance(W, np.ndarray):
                Wd = W + np.diag(delta * shift)
            else:
                Wd = W + sp.diags(delta * shift)
            d, info = projected_cg(Wd, g, self.project, precond_diagonal(Wd), np.inf,
                                   params.cg_tolerance, min(params.max_cg, 2 * self.nfree + 10))
            if info != NEGATIVE_CURVATURE and g @ d < 0:
                self._delta = delta
                return d, info
            if not np.any(self.project(g)):
                return np.zeros_like(g), CONVERGED
            delta = 1e-4 if delta == 0 else 10.0 * delta
        w = self.scale ** 2
        return -self.project(w * g, w), NEGATIVE_CURVATURE

    def max_step(self, q, dq, tau: float) -> float:
        alpha = 1.0
        s, ds = self.slack(q), -(self.G @ dq)
        alpha = min(alpha, _ftb(s, ds, tau))
        lo = self.has_lo
        alpha = min(alpha, _ftb(q[lo] - self.lo[lo], dq[lo], tau))
        hi = self.has_hi
        alpha = min(alpha, _ftb(self.hi[hi] - q[hi], -dq[hi], tau))
        return alpha

    # -- starting points --------------------------------------------------------------
    def center_point(self) -> np.ndarray:
        if getattr(self, "_center", None) is None:
            self._center = self._build_center()
        return self._center.copy()

    def _build_center(self) -> np.ndarray:
        q = np.zeros(self.nfree)
        fin = self.has_lo & self.has_hi
        q[fin] = 0.5 * (self.lo[fin] + self.hi[fin])
        q[self.has_lo & ~self.has_hi] = self.lo[self.has_lo & ~self.has_hi]
        for g, t in zip(self.groups, self.targets):
            q[g] = self.lo[g] + (t - self.lo[g].sum()) / len(g)
        return self._make_interior(q)

    def random_point(self, rng: np.random.Generator) -> np.ndarray:
        q = np.zeros(self.nfree)
        fin = self.has_lo & self.has_hi
        q[fin] = self.lo[fin] + rng.uniform(0.1, 0.9, fin.sum()) * (self.hi[fin] - self.lo[fin])
        q[self.has_lo & ~self.has_hi] = self.lo[self.has_lo & ~self.has_hi]
        q = self._fit_groups(q)
        return self._mix(q, 0.1)

    def hint_point(self, p_full: np.ndarray) -> np.ndarray:
        q = np.clip(self.reduce(p_full), self.lo, self.hi)
        return self._mix(self._fit_groups(q), 0.1)

    def _fit_groups(self, q):
        q = q.copy()
        for g, t in zip(self.groups, self.targets):
            lo, hi = self.lo[g], self.hi[g]
            S, k = q[g].sum(), len(g)
            lo_s, hi_s = lo.sum(), hi.sum()
            if S > t:
                q[g] = lo + (q[g] - lo) * (t - lo_s) / max(S - lo_s, 1e-300)
            elif S < t:
                q[g] = hi - (hi - q[g]) * (hi_s - t) / max(hi_s - S, 1e-300)
        return q

    def _mix(self, q, theta):
        """Pull ``q`` toward the centre until strictly interior in x/y, then lift z."""
        c = self.center_point()
        for _ in range(60):
            p = (1 - theta) * q + theta * c
            p = self._lift(p)
            if self._interior(p):
                return p
            theta = 1 - 0.5 * (1 - theta)
        return c

    def _make_interior(self, q):
        # rows with only non-negative coefficients on bounded variables: shrink
        # those variables toward their lower bounds until the row has slack
        q = q.copy()
        G = self.G
        for r in range(G.shape[0]):
            cols = G.indices[G.indptr[r]:G.indptr[r + 1]]
            vals = G.data[G.indptr[r]:G.indptr[r + 1]]
            if len(cols) == 0 or np.any(vals <= 0) or not np.all(self.has_lo[cols]):
                continue
            lo = self.lo[cols]
            room = self.h[r] - vals @ lo
            used = vals @ (q[cols] - lo)
            if used > 0.5 * room:
                q[cols] = lo + (q[cols] - lo) * 0.5 * room / used
        return self._lift(q)

    def _lift(self, q):
        """Raise variables without an upper bound so every row has slack >= 1."""
        q = q.copy()
        G = self.G
        unb = ~self.has_hi
        if not unb.any() or G.shape[0] == 0:
            return q
        s = self.slack(q)
        Gc = G.tocsc()
        for j in np.flatnonzero(unb):
            col = Gc.indices[Gc.indptr[j]:Gc.indptr[j + 1]]
            coef = Gc.data[Gc.indptr[j]:Gc.indptr[j + 1]]
            neg = coef < 0
            if not neg.any():
                continue
            need = np.max((1.0 - s[col[neg]]) / -coef[neg])
            lo = self.lo[j] if self.has_lo[j] else -np.inf
            target = max(lo, q[j] + max(need, 0.0), q[j])
            if self.has_lo[j]:
                target = max(target, self.lo[j] + 1.0)
            s[col] -= coef * (target - q[j])
            q[j] = target
        return q

    def _interior(self, q) -> bool:
        return bool(np.all(self.slack(q) > 0)
                    and np.all(q[self.has_lo] > self.lo[self.has_lo])
                    and np.all(q[self.has_hi] < self.hi[self.has_hi]))


def _ftb(v: np.ndarray, dv: np.ndarray, tau: float) -> float:
    neg = dv < 0
    if not neg.any():
        return 1.0
    return float(min(1.0, np.min(-tau * v[neg] / dv[neg])))


CONVERGED, NEGATIVE_CURVATURE, BOUNDARY, MAXITER = "converged", "negative_curvature", "boundary", "maxiter"


def precond_diagonal(W) -> np.ndarray:
    d = np.abs(W.diagonal())
    return np.maximum(d, 1e-8 * max(1.0, d.max()))


def projected_cg(W, g, project, precond_diag, radius=np.inf, rtol=1e-10, maxiter=200):
    """Truncated CG for min 0.5 d'Wd + g'd on the null space of the group sums.

    Preconditioned by ``diag(precond_diag)``, whose norm also measures the
    trust radius. Stops when the preconditioned residual falls below ``rtol``
    times its initial value, on the trust boundary, or along a direction of
    non-positive curvature (followed to the boundary; with an infinite radius
    the last iterate, or the preconditioned steepest-descent direction if there
    is none, is returned). Returns ``(d, reason)``.
    """
    M = precond_diag
    minv = 1.0 / M
    d = np.zeros_like(g)
    r = g.copy()
    z = project(minv * r, minv)
    rz = r @ z
    if rz <= 0:
        return d, CONVERGED
    stop = rtol * np.sqrt(rz)
    p = -z
    for _ in range(maxiter):
        Wp = W @ p
        curv = p @ Wp
        if curv <= 0:
            if np.isfinite(radius):
                return d + _to_boundary(d, p, M, radius) * p, NEGATIVE_CURVATURE
            return (d if np.any(d) else p), NEGATIVE_CURVATURE
        a = rz / curv
        dn = d + a * p
        if np.isfinite(radius) and dn @ (M * dn) >= radius ** 2:
            return d + _to_boundary(d, p, M, radius) * p, BOUNDARY
        d = dn
        r = r + a * Wp
        z = project(minv * r, minv)
        rz_new = r @ z
        if np.sqrt(max(rz_new, 0.0)) <= stop:
            return d, CONVERGED
        p = -z + (rz_new / rz) * p
        rz = rz_new
    return d, MAXITER


def _to_boundary(d, p, M, radius):
    a = p @ (M * p)
    b = 2.0 * (d @ (M * p))
    c = d @ (M * d) - radius ** 2
    return (-b + np.sqrt(max(b * b - 4 * a * c, 0.0))) / (2 * a)


def _safeguard(lam, dist, gamma, kappa=1e10):
    return np.clip(lam, gamma / (kappa * dist), kappa * gamma / dist)


def interior_solve(bp: BarrierProblem, q0: np.ndarray, params: IpmParams,
                   log: list | None = None):
    """Barrier path following from a strictly interior ``q0``. Returns (q, mult, status, iters).

    ``log`` collects ``(gamma, inner iterations, barrier KKT, KKT)`` per barrier level.
    """
    q = q0.copy()
    gamma = params.gamma0
    lo, hi = bp.has_lo, bp.has_hi
    lam = _safeguard(np.ones(bp.G.shape[0]), bp.slack(q), gamma)
    ml = np.zeros(bp.nfree)
    mu = np.zeros(bp.nfree)
    ml[lo] = _safeguard(np.ones(lo.sum()), q[lo] - bp.lo[lo], gamma)
    mu[hi] = _safeguard(np.ones(hi.sum()), bp.hi[hi] - q[hi], gamma)
    tau = params.fraction_to_boundary
    iters = 0
    bp._delta = 0.0

    def mults():
        return Multipliers(lam, ml, mu)

    def primal():
        nonlocal lam
        lam = gamma / bp.slack(q)
        ml[lo] = gamma / (q[lo] - bp.lo[lo])
        mu[hi] = gamma / (bp.hi[hi] - q[hi])

    def recentre():
        nonlocal lam
        lam = _safeguard(lam, bp.slack(q), gamma)
        ml[lo] = _safeguard(ml[lo], q[lo] - bp.lo[lo], gamma)
        mu[hi] = _safeguard(mu[hi], bp.hi[hi] - q[hi], gamma)

    for _outer in range(params.max_outer):
        it0 = iters
        for _inner in range(params.max_inner):
            if bp.kkt(q, mults(), gamma) <= max(10.0 * gamma, 0.1 * params.kkt_tolerance):
                break
            if bp.kkt(q, mults()) <= params.kkt_tolerance:
                break
            iters += 1
            g = bp.barrier_gradient(q, gamma)
            W = bp.newton_matrix(q, mults())
            dq, _ = bp._solve_projected(W, g, params)
            if not np.any(dq):
                break
            # the weighted projection loses the group sums to rounding over
            # many steps; re-project exactly and pull back toward the targets
            dq = bp.project(dq) + bp.group_correction(q)
            s, ds = bp.slack(q), -(bp.G @ dq)
            dl, du = q[lo] - bp.lo[lo], bp.hi[hi] - q[hi]
            dlam = (gamma - lam * s - lam * ds) / s
            dml = np.zeros_like(ml)
            dmu = np.zeros_like(mu)
            dml[lo] = (gamma - ml[lo] * dl - ml[lo] * dq[lo]) / dl
            dmu[hi] = (gamma - mu[hi] * du + mu[hi] * dq[hi]) / du
            alpha = bp.max_step(q, dq, tau)
            ad = min(_ftb(lam, dlam, tau), _ftb(ml[lo], dml[lo], tau), _ftb(mu[hi], dmu[hi], tau))
            phi0 = bp.barrier_value(q, gamma)
            slope = g @ dq
            noise = 1e-13 * max(1.0, abs(phi0))
            for _ in range(60):
                if bp.barrier_value(q + alpha * dq, gamma) <= phi0 + 1e-4 * alpha * slope + noise:
                    break
                alpha *= 0.5
            else:
                alpha = 0.0
            if alpha == 0.0:
                break
            q = q + alpha * dq
            if params.primal_multipliers:
                primal()
            else:
                lam = lam + ad * dlam
                ml += ad * dml
                mu += ad * dmu
                recentre()
        if log is not None:
            log.append((gamma, iters - it0, bp.kkt(q, mults(), gamma), bp.kkt(q, mults())))
        if bp.kkt(q, mults()) <= params.kkt_tolerance:
            return q, mults(), OPTIMAL, iters
        if gamma <= params.gamma_min:
            break
        gamma *= params.gamma_factor
        primal() if params.primal_multipliers else recentre()
    status = OPTIMAL if bp.kkt(q, mults()) <= params.kkt_tolerance else ITERATION_LIMIT
    return q, mults(), status, iters


def solve_nlp(nlp: NlpData, fixings: Mapping[int, float] | None = None,
              params: IpmParams = IpmParams(), hints: Sequence[np.ndarray] = ()) -> RelaxedSolution:
    """Multi-start barrier solve; the best KKT point (lowest objective) wins."""
    bp = BarrierProblem(nlp, fixings)
    if bp.infeasible:
        return RelaxedSolution(np.full(nlp.n, np.nan), np.inf, np.inf, INFEASIBLE)
    if bp.nfree == 0:
        p = bp.full(np.zeros(0))
        m = Multipliers(np.zeros(nlp.G.shape[0]), np.zeros(nlp.n), np.zeros(nlp.n))
        return RelaxedSolution(p, float(nlp.fun(p)), 0.0, OPTIMAL, m)
    starts: list[tuple[str, np.ndarray]] = [("center", bp.center_point())]
    for k, hnt in enumerate(hints):
        starts.append((f"hint{k}", bp.hint_point(hnt)))
    rng = np.random.default_rng(params.seed)
    while len(starts) < params.multistarts:
        starts.append(("random", bp.random_point(rng)))
    starts = starts[:max(1, params.multistarts)]
    best: RelaxedSolution | None = None
    ends = []
    for name, q0 in starts:
        q, m, status, iters = interior_solve(bp, q0, params)
        val = bp.f(q)
        cand = RelaxedSolution(bp.full(q), float(val), bp.kkt(q, m), status,
                               _full_multipliers(bp, m), None, iters, name)
        ends.append(cand)
        if best is None or _better(cand, best):
            best = cand
    return replace(best, others=tuple(e.point for e in ends if e is not best))


def _better(a: RelaxedSolution, b: RelaxedSolution) -> bool:
    if (a.status == OPTIMAL) != (b.status == OPTIMAL):
        return a.status == OPTIMAL
    return a.objective < b.objective


def _full_multipliers(bp: BarrierProblem, m: Multipliers) -> Multipliers:
    lo = np.zeros(bp.nlp.n)
    hi = np.zeros(bp.nlp.n)
    lo[bp.free] = m.lower
    hi[bp.free] = m.upper
    ineq = np.zeros(bp.nlp.G.shape[0])
    ineq[bp.rows] = m.ineq
    return Multipliers(ineq, lo, hi)


def solve_relaxation(problem: MinlpProblem, fixings: Mapping[int, float] | None = None,
                     params: IpmParams = IpmParams(),
                     hints: Sequence[np.ndarray] = ()) -> RelaxedSolution:
    """Continuous relaxation of the transformed problem with some binaries fixed.

    When every binary is fixed, z is set to its constraint-determined lower
    bound and the exact objective is returned.
    """
    fixings = dict(fixings or {})
    for k, v in fixings.items():
        if not 0 <= k < problem.n_binary:
            raise IndexError(f"only binary variables can be fixed, got index {k}")
        if v not in (0, 1):
            raise ValueError("fixings must be 0 or 1")
    nlp = nlp_from_problem(problem)
    if len(fixings) == problem.n_binary:
        p = np.zeros(problem.nvar)
        for k, v in fixings.items():
            p[k] = v
        a = problem.unpack(p)
        if (a.x @ problem.scenario.sizes > problem.scenario.capacities * (1 + 1e-9)).any() or \
                any(abs(a.y[g].sum() - (len(g) - 1)) > 0 for g in problem.groups):
            return RelaxedSolution(np.full(problem.nvar, np.nan), np.inf, np.inf, INFEASIBLE)
        a = Assignment(a.x, a.y, problem.z_lower_bound(a.x, a.y))
        p = problem.pack(a)
        return RelaxedSolution(p, problem.objective(p), 0.0, OPTIMAL, None, a)
    sol = solve_nlp(nlp, fixings, params, hints)
    if sol.status == INFEASIBLE:
        return sol
    return RelaxedSolution(sol.point, problem.objective(sol.point), sol.kkt_residual, sol.status,
                           sol.multipliers, problem.unpack(sol.point), sol.iterations, sol.start,
                           sol.others)


def kkt_residual(problem: MinlpProblem | NlpData, point, multipliers: Multipliers,
                 gamma: float = 0.0, fixings: Mapping[int, float] | None = None) -> float:
    """Max-norm KKT residual (stationarity, feasibility, sigma*lambda - gamma) at a point."""
    nlp = nlp_from_problem(problem) if isinstance(problem, MinlpProblem) else problem
    p = problem.pack(point) if isinstance(point, Assignment) else np.asarray(point, dtype=float)
    bp = BarrierProblem(nlp, fixings)
    m = Multipliers(np.asarray(multipliers.ineq, float)[bp.rows],
                    np.asarray(multipliers.lower)[bp.free],
                    np.asarray(multipliers.upper)[bp.free])
    return bp.kkt(bp.reduce(p), m, gamma)


def quadratic_step(bp: BarrierProblem, point: np.ndarray, multipliers: Multipliers,
                   gamma: float, params: IpmParams = IpmParams()):
    """Newton/CG step of the barrier subproblem at a full-space point."""
    m = Multipliers(np.asarray(multipliers.ineq, float)[bp.rows],
                    np.asarray(multipliers.lower)[bp.free],
                    np.asarray(multipliers.upper)[bp.free])
    dq, ds, alpha = bp.quadratic_step(bp.reduce(point), m, gamma, params)
    dp = np.zeros(bp.nlp.n)
    dp[bp.free] = dq
    return dp, ds, alpha
