"""Dense linear programming and polytope queries.

Everything downstream (error-bound estimation, feasible-set construction,
interval filtering) reduces to small/moderate LPs of the form

    minimize    c' x
    subject to  A x <= b,   x free.

Two interchangeable backends are provided: ``"highs"`` (scipy's HiGHS
simplex, the default) and ``"bland"`` (a self-contained dense two-phase
simplex with Bland's anti-cycling rule, used as the reference
implementation and for cross-checks).  Both return vertex solutions.
"""

from __future__ import annotations

import warnings
import weakref
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.optimize import linprog, nnls

DEFAULT_FEAS_TOL = 1e-9
DEFAULT_SLACK_TOL = 1e-9
DEFAULT_BACKEND = "highs"

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LpError(Exception):
    """Base class for LP-layer errors."""


class SolverFailure(LpError):
    """The solver could not produce a trustworthy answer."""


class UnboundedDirection(LpError):
    """A support query hit an unbounded direction of the polytope."""


class InfeasiblePolytope(LpError):
    """The polytope has no feasible point."""


# Global LP call counter, used to assert the no-LP property of the
# precomputed (global-bound) filter and for timing diagnostics.
_solve_calls = 0


def solve_calls() -> int:
    return _solve_calls


def reset_solve_calls() -> None:
    global _solve_calls
    _solve_calls = 0


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """minimize cost' x  subject to  constraint_matrix x <= rhs, x free."""

    cost: np.ndarray
    constraint_matrix: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.cost, dtype=float))
        A = np.atleast_2d(np.asarray(self.constraint_matrix, dtype=float))
        b = np.atleast_1d(np.asarray(self.rhs, dtype=float))
        if A.shape[0] != b.shape[0]:
            raise ValueError(
                f"constraint rows ({A.shape[0]}) != rhs length ({b.shape[0]})"
            )
        if A.shape[1] != c.shape[0]:
            raise ValueError(
                f"cost length ({c.shape[0]}) != constraint columns ({A.shape[1]})"
            )
        object.__setattr__(self, "cost", c)
        object.__setattr__(self, "constraint_matrix", A)
        object.__setattr__(self, "rhs", b)

    @property
    def n_vars(self) -> int:
        return self.cost.shape[0]

    @property
    def n_rows(self) -> int:
        return self.rhs.shape[0]


@dataclass(frozen=True, eq=False)
class LpOutcome:
    status: str
    optimizer: np.ndarray | None = None
    optimal_value: float | None = None


@dataclass(frozen=True, eq=False)
class Polytope:
    """H-representation polytope {x : normals x <= offsets}."""

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.normals, dtype=float))
        h = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        if H.shape[0] != h.shape[0]:
            raise ValueError(
                f"normals rows ({H.shape[0]}) != offsets length ({h.shape[0]})"
            )
        zero_rows = ~np.any(H != 0.0, axis=1)
        if np.any(zero_rows & (h < 0.0)):
            raise ValueError("zero normal with negative offset: trivially infeasible")
        object.__setattr__(self, "normals", H)
        object.__setattr__(self, "offsets", h)

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @property
    def n_rows(self) -> int:
        return self.normals.shape[0]

    def contains(self, x, tol: float = DEFAULT_FEAS_TOL) -> bool:
        return bool(np.all(self.normals @ np.asarray(x, dtype=float) <= self.offsets + tol))


def solve_lp(problem: LinearProgram, feas_tol: float = DEFAULT_FEAS_TOL,
             backend: str | None = None) -> LpOutcome:
    """Solve the LP, returning a vertex-optimal solution when one exists.

    Raises SolverFailure if the backend cannot certify an answer; an
    Optimal outcome is guaranteed to satisfy all constraints within
    ``feas_tol``.
    """
    global _solve_calls
    _solve_calls += 1
    backend = backend or DEFAULT_BACKEND
    if backend == "highs":
        out = _solve_highs(problem, feas_tol)
    elif backend == "bland":
        out = _solve_bland(problem, feas_tol)
    else:
        raise ValueError(f"unknown LP backend: {backend!r}")
    if out.status == OPTIMAL:
        resid = problem.constraint_matrix @ out.optimizer - problem.rhs
        worst = float(resid.max()) if resid.size else 0.0
        scale = max(1.0, float(np.abs(problem.rhs).max()) if problem.rhs.size else 1.0)
        if worst > feas_tol * scale:
            raise SolverFailure(
                f"optimal point violates constraints by {worst:.3e} (> feas_tol)"
            )
    return out


def _solve_highs(problem: LinearProgram, feas_tol: float) -> LpOutcome:
    tol = min(feas_tol, 1e-9)
    res = linprog(
        problem.cost,
        A_ub=problem.constraint_matrix,
        b_ub=problem.rhs,
        bounds=[(None, None)] * problem.n_vars,
        method="highs",
        options={
            "primal_feasibility_tolerance": tol * 1e-1,
            "dual_feasibility_tolerance": tol * 1e-1,
        },
    )
    if res.status == 0:
        x = np.asarray(res.x, dtype=float)
        return LpOutcome(OPTIMAL, x, float(problem.cost @ x))
    if res.status == 2:
        return LpOutcome(INFEASIBLE)
    if res.status == 3:
        return LpOutcome(UNBOUNDED)
    raise SolverFailure(f"HiGHS failed (status {res.status}): {res.message}")


def _solve_bland(problem: LinearProgram, feas_tol: float) -> LpOutcome:
    """Two-phase dense tableau simplex with Bland's pivoting rule.

    Free variables are split as x = x+ - x-; slack variables complete the
    standard form.  Intended for small instances (reference solver and
    test oracle cross-checks).
    """
    c = problem.cost
    A = problem.constraint_matrix
    b = problem.rhs.copy()
    m, n = A.shape

    # columns: [x+ (n), x- (n), slacks (m), artificials (n_art)]
    body = np.hstack([A, -A, np.eye(m)])
    flip = b < 0.0
    body[flip] *= -1.0
    b = np.where(flip, -b, b)

    art_rows = np.flatnonzero(flip)
    n_art = art_rows.size
    n_core = 2 * n + m
    if n_art:
        art_cols = np.zeros((m, n_art))
        art_cols[art_rows, np.arange(n_art)] = 1.0
        body = np.hstack([body, art_cols])
    total = n_core + n_art

    T = np.zeros((m + 1, total + 1))
    T[:m, :total] = body
    T[:m, -1] = b
    basis = np.empty(m, dtype=int)
    basis[:] = 2 * n + np.arange(m)                 # slack basis by default
    basis[art_rows] = n_core + np.arange(n_art)     # artificials where flipped

    piv_tol = 1e-10
    max_iter = 2000 * (m + n + 10)

    if n_art:
        # phase 1: minimize sum of artificials
        T[m, n_core:total] = 1.0
        for r in art_rows:
            T[m] -= T[r]
        status = _simplex_iterate(T, basis, total, piv_tol, max_iter)
        if status == UNBOUNDED:
            raise SolverFailure("phase-1 reported unbounded (internal error)")
        if -T[m, -1] > max(feas_tol, 1e-9) * max(1.0, np.abs(b).max() if b.size else 1.0):
            return LpOutcome(INFEASIBLE)
        # drive remaining artificials out of the basis where possible
        for r in range(m):
            if basis[r] >= n_core:
                cand = np.flatnonzero(np.abs(T[r, :n_core]) > piv_tol)
                if cand.size:
                    _pivot(T, basis, r, int(cand[0]))
        keep = [r for r in range(m) if basis[r] < n_core]
        if len(keep) < m:
            # redundant equality rows after phase 1: drop them
            T = np.vstack([T[keep], T[m:]])
            basis = basis[keep]
            m = len(keep)
        T[:, n_core:total] = 0.0  # disable artificial columns

    # phase 2 objective row
    T[-1, :] = 0.0
    T[-1, :n] = c
    T[-1, n:2 * n] = -c
    for r in range(m):
        j = basis[r]
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[r]
    status = _simplex_iterate(T, basis, n_core, piv_tol, max_iter)
    if status == UNBOUNDED:
        return LpOutcome(UNBOUNDED)

    x_full = np.zeros(n_core)
    for r in range(m):
        if basis[r] < n_core:
            x_full[basis[r]] = T[r, -1]
    x = x_full[:n] - x_full[n:2 * n]
    return LpOutcome(OPTIMAL, x, float(c @ x))


def _simplex_iterate(T, basis, n_cols, piv_tol, max_iter) -> str:
    """Run simplex pivots in place until optimal/unbounded (Bland's rule)."""
    m = len(basis)
    for _ in range(max_iter):
        reduced = T[-1, :n_cols]
        entering = -1
        for j in range(n_cols):
            if reduced[j] < -piv_tol:
                entering = j
                break
        if entering < 0:
            return OPTIMAL
        col = T[:m, entering]
        rows = np.flatnonzero(col > piv_tol)
        if rows.size == 0:
            return UNBOUNDED
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        tied = rows[ratios <= best + piv_tol]
        leave = int(tied[np.argmin(basis[tied])])  # Bland: smallest basis index
        _pivot(T, basis, leave, entering)
    raise SolverFailure("simplex iteration limit exceeded (cycling safeguard)")


def _pivot(T, basis, row, col) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def basis_from_active(A: np.ndarray, act: np.ndarray) -> np.ndarray | None:
    """n linearly independent rows (by index) out of the active set, or None."""
    n = A.shape[1]
    if act.size < n:
        return None
    from scipy.linalg import qr
    _, _, piv = qr(A[act].T, mode="economic", pivoting=True)
    basis = act[piv[:n]]
    if abs(np.linalg.det(A[basis])) < 1e-12:
        return None
    return np.asarray(basis, dtype=int)


def vertex_walk(A: np.ndarray, b: np.ndarray, d: np.ndarray, basis,
                feas_tol: float = DEFAULT_FEAS_TOL, max_iter: int = 2000):
    """Active-set simplex walk: maximize d'x over {Ax <= b} from a vertex.

    `basis` holds n row indices whose equations define the starting vertex.
    Returns (x, basis) at the optimum, the string "unbounded", or None when
    numerics degrade (caller falls back to a cold-start solver).  Bland's
    rule on both the leaving and entering choice guarantees termination.
    Each successful walk counts as one LP solve.
    """
    global _solve_calls
    n = A.shape[1]
    B = np.array(basis, dtype=int)
    d_scale = max(1.0, float(np.linalg.norm(d)))
    feas_scale = feas_tol * float(np.max(np.maximum(1.0, np.abs(b))))
    in_basis = np.zeros(A.shape[0], dtype=bool)
    in_basis[B] = True
    rhs = np.zeros(n)
    for _ in range(max_iter):
        try:
            with warnings.catch_warnings():
                # singular bases are expected on degenerate polytopes and are
                # handled by the finiteness check below
                warnings.simplefilter("ignore")
                lu = lu_factor(A[B], check_finite=False)
        except Exception:
            return None
        x = lu_solve(lu, b[B], check_finite=False)
        mu = lu_solve(lu, d, trans=1, check_finite=False)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(mu))):
            return None
        neg = np.flatnonzero(mu < -1e-11 * d_scale)
        if neg.size == 0:
            if np.max(A @ x - b) > feas_scale:
                return None
            _solve_calls += 1
            return x, B
        # Bland: leave on the smallest original row index
        pos = int(neg[np.argmin(B[neg])])
        rhs[:] = 0.0
        rhs[pos] = -1.0
        s = lu_solve(lu, rhs, check_finite=False)
        step = A @ np.column_stack([x, s])
        slack = b - step[:, 0]
        As = step[:, 1]
        cand = np.flatnonzero((As > 1e-11) & ~in_basis)
        if cand.size == 0:
            _solve_calls += 1
            return "unbounded"
        t = slack[cand] / As[cand]
        tmin = float(np.min(t))
        ties = cand[t <= tmin + 1e-12 * max(1.0, abs(tmin))]
        enter = int(np.min(ties))  # Bland: enter on the smallest row index
        in_basis[B[pos]] = False
        in_basis[enter] = True
        B[pos] = enter
    return None


class SupportOracle:
    """Exact support values over one fixed polytope, amortized across queries.

    Optimal vertices found so far are cached together with their active row
    sets.  A query first checks whether the best cached vertex is provably
    optimal for the new direction: the direction must lie in the cone of
    the vertex's active normals, verified by a nonnegative least-squares
    fit with a tiny residual.  Uncertified directions run a warm-started
    active-set walk from the best cached vertex; only when that degrades
    numerically does a cold-start LP run.  All paths return exact vertex
    optima (certificate- or solver-validated).
    """

    def __init__(self, poly: Polytope, feas_tol: float = DEFAULT_FEAS_TOL):
        self.poly = poly
        self.feas_tol = feas_tol
        self._verts = np.empty((0, poly.dim))
        self._active: list[np.ndarray] = []
        self._basis: list[np.ndarray | None] = []
        self.lp_fallbacks = 0

    def value(self, direction) -> float:
        return self.support_with_vertex(direction)[0]

    def support_with_vertex(self, direction):
        """(support value, optimal vertex, basis row indices or None)."""
        d = np.asarray(direction, dtype=float)
        scale = max(1.0, float(np.linalg.norm(d)))
        j = -1
        if self._verts.shape[0]:
            vals = self._verts @ d
            j = int(np.argmax(vals))
            if self._certified(j, d, scale):
                return float(vals[j]), self._verts[j], self._basis[j]
            basis = self._basis[j]
            if basis is not None:
                walked = vertex_walk(self.poly.normals, self.poly.offsets, d,
                                     basis, self.feas_tol)
                if walked == "unbounded":
                    raise UnboundedDirection(
                        "polytope is unbounded in the queried direction")
                if walked is not None:
                    x, B = walked
                    self._remember(x, B)
                    return float(d @ x), x, B
        self.lp_fallbacks += 1
        out = solve_lp(LinearProgram(-d, self.poly.normals, self.poly.offsets),
                       self.feas_tol)
        if out.status == UNBOUNDED:
            raise UnboundedDirection("polytope is unbounded in the queried direction")
        if out.status == INFEASIBLE:
            raise InfeasiblePolytope("support query on an empty polytope")
        x = out.optimizer
        basis = self._remember(x, None)
        return -out.optimal_value, x, basis

    def _remember(self, x: np.ndarray, basis: np.ndarray | None):
        resid = self.poly.offsets - self.poly.normals @ x
        act = np.flatnonzero(resid <= 1e-9 * np.maximum(1.0, np.abs(self.poly.offsets)))
        if act.size == 0:
            return None
        if basis is None:
            basis = basis_from_active(self.poly.normals, act)
        self._verts = np.vstack([self._verts, x])
        self._active.append(act)
        self._basis.append(basis)
        return basis

    def _certified(self, j: int, d: np.ndarray, scale: float) -> bool:
        act = self._active[j]
        A = self.poly.normals[act]
        try:
            mu, rnorm = nnls(A.T, d)
        except Exception:
            return False
        return rnorm <= 1e-10 * scale


_oracles: "weakref.WeakKeyDictionary[Polytope, SupportOracle]" = weakref.WeakKeyDictionary()


def support_oracle(poly: Polytope, feas_tol: float = DEFAULT_FEAS_TOL) -> SupportOracle:
    """Shared per-polytope SupportOracle (keyed by object identity)."""
    oracle = _oracles.get(poly)
    if oracle is None:
        oracle = SupportOracle(poly, feas_tol)
        _oracles[poly] = oracle
    return oracle


def support_value(poly: Polytope, direction, feas_tol: float = DEFAULT_FEAS_TOL,
                  backend: str | None = None, cached: bool = True) -> float:
    """max_{x in poly} direction' x.

    Raises UnboundedDirection when the polytope is unbounded along the
    direction (for a feasible parameter set this means the data are not
    informative enough) and InfeasiblePolytope when it is empty.  With
    cached=True (default) repeated queries against the same polytope are
    served by a shared SupportOracle.
    """
    d = np.asarray(direction, dtype=float)
    if cached and backend is None:
        return support_oracle(poly, feas_tol).value(d)
    out = solve_lp(LinearProgram(-d, poly.normals, poly.offsets), feas_tol, backend)
    if out.status == UNBOUNDED:
        raise UnboundedDirection("polytope is unbounded in the queried direction")
    if out.status == INFEASIBLE:
        raise InfeasiblePolytope("support query on an empty polytope")
    return -out.optimal_value


def chebyshev_center(poly: Polytope, feas_tol: float = DEFAULT_FEAS_TOL,
                     radius_cap: float = 1e6) -> tuple[np.ndarray, float]:
    """Center and radius of the largest ball inside the polytope.

    The radius is capped so the LP stays bounded for unbounded polytopes.
    """
    H, h = poly.normals, poly.offsets
    norms = np.linalg.norm(H, axis=1)
    A = np.hstack([H, norms[:, None]])
    A = np.vstack([A, np.zeros((2, poly.dim + 1))])
    A[-2, -1] = -1.0           # r >= 0
    A[-1, -1] = 1.0            # r <= cap
    b = np.concatenate([h, [0.0, radius_cap]])
    c = np.zeros(poly.dim + 1)
    c[-1] = -1.0
    out = solve_lp(LinearProgram(c, A, b), feas_tol)
    if out.status != OPTIMAL:
        raise InfeasiblePolytope("Chebyshev-center LP did not report a feasible point")
    return out.optimizer[:-1].copy(), float(out.optimizer[-1])


def remove_redundant_constraints(poly: Polytope,
                                 slack_tol: float = DEFAULT_SLACK_TOL,
                                 feas_tol: float = DEFAULT_FEAS_TOL) -> Polytope:
    """Drop rows that do not change the point set.

    A row is removed only when its maximum over (a subset of) the retained
    rows is <= offset + slack_tol, which certifies redundancy with respect
    to the full retained set as well.  Rows are processed in fixed order,
    so the output is deterministic.

    For polytopes with a nonempty interior a Clarkson-style sweep is used:
    candidate rows are tested against the set of constraints already proven
    essential, and violations are resolved by ray shooting from an interior
    point, which identifies an essential row.  This keeps every LP small
    (the essential set is typically orders of magnitude smaller than the
    input).  Degenerate polytopes fall back to the plain sequential test.
    """
    if poly.n_rows == 0:
        return poly
    center, radius = chebyshev_center(poly, feas_tol)
    scale = max(1.0, float(np.abs(poly.offsets).max()))
    if radius > 1e-7 * scale:
        keep = _reduce_clarkson(poly, center, slack_tol, feas_tol)
    else:
        keep = _reduce_sequential(poly, slack_tol, feas_tol)
    return Polytope(poly.normals[keep], poly.offsets[keep])


def _reduce_sequential(poly: Polytope, slack_tol: float, feas_tol: float) -> np.ndarray:
    H, h = poly.normals, poly.offsets
    m = H.shape[0]
    retained = np.ones(m, dtype=bool)
    for i in range(m):
        retained[i] = False
        others = np.flatnonzero(retained)
        if others.size == 0:
            retained[i] = True
            continue
        out = solve_lp(LinearProgram(-H[i], H[others], h[others]), feas_tol)
        if out.status == UNBOUNDED:
            retained[i] = True  # only bound in this direction
        elif out.status == OPTIMAL and -out.optimal_value <= h[i] + slack_tol:
            pass  # redundant, stays removed
        else:
            retained[i] = True
    return np.flatnonzero(retained)


def _reduce_clarkson(poly: Polytope, center: np.ndarray,
                     slack_tol: float, feas_tol: float) -> np.ndarray:
    H, h = poly.normals, poly.offsets
    m, n = H.shape
    box = 1e6 * max(1.0, float(np.abs(center).max()), float(np.abs(h).max()))
    box_A = np.vstack([np.eye(n), -np.eye(n)])
    box_b = np.full(2 * n, box)

    # Rows of the combined system: 0..m-1 are polytope rows, the last 2n
    # are the bounding box.  Cached vertices are feasible points of the
    # current essential-set polytope together with the indices of their
    # active rows, used both as violation witnesses (skip the LP entirely)
    # and as exact-optimality certificates via a cone test.
    all_A = np.vstack([H, box_A])
    all_b = np.concatenate([h, box_b])

    essential: list[int] = []
    removed = np.zeros(m, dtype=bool)
    slack_from_center = h - H @ center  # > 0 strictly inside

    verts: list[np.ndarray] = []
    vert_act: list[np.ndarray] = []

    def add_essential(j: int):
        # growing the essential set may cut off cached vertices
        nonlocal verts, vert_act
        essential.append(j)
        tol = feas_tol * max(1.0, abs(h[j]))
        feas = [H[j] @ v <= h[j] + tol for v in verts]
        verts = [v for v, ok in zip(verts, feas) if ok]
        vert_act = [a for a, ok in zip(vert_act, feas) if ok]

    def certified(k: int, d: np.ndarray) -> bool:
        try:
            _, rnorm = nnls(all_A[vert_act[k]].T, d)
        except Exception:
            return False
        return rnorm <= 1e-10 * max(1.0, float(np.linalg.norm(d)))

    for i in range(m):
        if removed[i] or i in essential:
            continue
        d = H[i]
        while True:
            witness = None
            if verts:
                vals = np.array(verts) @ d
                k = int(np.argmax(vals))
                if vals[k] > h[i] + slack_tol:
                    witness = verts[k]
                elif certified(k, d):
                    removed[i] = True
                    break
            if witness is None:
                if essential:
                    idx = np.asarray(essential)
                    A = np.vstack([H[idx], box_A])
                    b = np.concatenate([h[idx], box_b])
                    rows = np.concatenate([idx, m + np.arange(2 * n)])
                else:
                    A, b = box_A, box_b
                    rows = m + np.arange(2 * n)
                x = None
                if verts:
                    # warm start from the best cached vertex of this polytope
                    row_pos = {int(r): p for p, r in enumerate(rows)}
                    act_pos = np.array(
                        [row_pos[int(r)] for r in vert_act[k] if int(r) in row_pos],
                        dtype=int)
                    basis = basis_from_active(A, act_pos)
                    if basis is not None:
                        walked = vertex_walk(A, b, d, basis, feas_tol)
                        if isinstance(walked, tuple):
                            x = walked[0]
                if x is None:
                    out = solve_lp(LinearProgram(-d, A, b), feas_tol)
                    if out.status != OPTIMAL:
                        add_essential(i)  # cannot certify redundancy, keep it
                        break
                    x = out.optimizer
                resid = b - A @ x
                act = np.flatnonzero(resid <= 1e-9 * np.maximum(1.0, np.abs(b)))
                if act.size:
                    verts.append(x)
                    vert_act.append(rows[act])
                if float(d @ x) <= h[i] + slack_tol:
                    removed[i] = True
                    break
                witness = x
            # ray shoot from the interior point toward the violating vertex
            direction = witness - center
            denom = H @ direction
            cand = np.flatnonzero(~removed & (denom > 1e-14))
            if cand.size == 0:
                add_essential(i)
                break
            t = slack_from_center[cand] / denom[cand]
            j = int(cand[np.argmin(t)])
            if j == i or j in essential:
                # first facet hit is the row under test (essential), or
                # numerics point back at an already-known row: keep i
                add_essential(i)
                break
            add_essential(j)
    keep = np.flatnonzero(~removed)
    return keep
