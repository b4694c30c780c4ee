"""Interior-point solver for small conic programs over a two-qubit state.

Two problem shapes are supported, both over a 4x4 Hermitian,
positive-semidefinite, unit-trace matrix rho:

* extremize a linear functional   Tr(M rho)
* minimize a sum of squares       sum_k Tr(M_k rho)^2

subject to affine constraints Tr(A_j rho) = b_j.  Each data equality is
relaxed to a two-sided inequality |Tr(A_j rho) - b_j| <= slack so that
noisy measured statistics cannot render the program spuriously
infeasible; the unit-trace equality stays exact.

The state is parameterized by 16 real coordinates in an orthonormal
Hermitian basis, and the solver follows the central path of a log-barrier
formulation (-log det for the cone, paired logs for the relaxed
equalities) with Newton centering steps reduced onto the nullspace of the
trace constraint.  Feasibility is established first on the affine part
(minimize the worst residual), then on the cone (maximize the smallest
eigenvalue of rho); a phase-1 optimum below ``-INFEASIBILITY_TOL`` is
reported as infeasible, which in practice means the input statistics are
corrupted or inconsistent beyond the requested slack.

Reported optima are adjusted by the certified duality gap so they bound
the true optimum from the safe side: lower bounds for minimization,
upper bounds for maximization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DIM = 4
N_COORDS = DIM * DIM

DEFAULT_SLACK = 1e-6
GAP_TOL = 5e-10
# widest certified gap still accepted when the last path decade cannot be
# centered in float64 (degenerate corners of slack-width feasible sets);
# keeps the optimizer-certificate contract (1e-7) with a 2x margin
RELAXED_GAP = 5e-8
# Newton decrement^2 / 2 threshold; the slack-box barriers condition the
# Hessian at ~1/slack^2, which caps the decrement reachable in float64
CENTER_TOL = 2.5e-10
MAX_NEWTON_STEPS = 500
INFEASIBILITY_TOL = 1e-7
# reduction factor applied to the barrier weight 1/t on every outer step
PATH_REDUCTION = 0.2

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_MAX_ITERATIONS = "max_iterations"


class SolverError(RuntimeError):
    """Raised by callers when a solve does not finish with status 'optimal'."""


def hermitian_basis() -> np.ndarray:
    """Orthonormal (Frobenius) basis of 4x4 Hermitian matrices, shape (16, 4, 4).

    Ordering: the four diagonal units, then for each i < j the symmetric and
    antisymmetric off-diagonal pair.  Orthonormality makes the coordinate map
    an isometry, so PSD projections and norms agree between the two pictures.
    """
    mats = []
    for i in range(DIM):
        m = np.zeros((DIM, DIM), dtype=complex)
        m[i, i] = 1.0
        mats.append(m)
    r = 1.0 / np.sqrt(2.0)
    for i in range(DIM):
        for j in range(i + 1, DIM):
            s = np.zeros((DIM, DIM), dtype=complex)
            s[i, j] = r
            s[j, i] = r
            mats.append(s)
            a = np.zeros((DIM, DIM), dtype=complex)
            a[i, j] = 1.0j * r
            a[j, i] = -1.0j * r
            mats.append(a)
    return np.array(mats)


_BASIS = hermitian_basis()
_TRACE_ROW = np.array([np.trace(b).real for b in _BASIS])


def to_coords(m: np.ndarray) -> np.ndarray:
    """Real coordinates of a Hermitian matrix in the orthonormal basis."""
    return np.einsum("kij,ji->k", _BASIS, np.asarray(m, dtype=complex)).real


def from_coords(x: np.ndarray) -> np.ndarray:
    """Hermitian matrix with the given coordinates."""
    return np.tensordot(np.asarray(x, dtype=float), _BASIS, axes=(0, 0))


@dataclass(frozen=True)
class LinearObjective:
    matrix: np.ndarray
    sense: str = "max"

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        _check_observable(self.matrix, "objective matrix")


@dataclass(frozen=True)
class QuadraticObjective:
    """Minimize sum_k Tr(terms[k] rho)^2."""

    terms: tuple

    def __post_init__(self):
        if len(self.terms) == 0:
            raise ValueError("quadratic objective needs at least one term")
        for k, t in enumerate(self.terms):
            _check_observable(t, f"objective term {k}")


@dataclass
class ConicProblem:
    objective: LinearObjective | QuadraticObjective
    constraints: list = field(default_factory=list)
    slack: float = DEFAULT_SLACK

    def __post_init__(self):
        if not self.slack > 0.0:
            raise ValueError(f"slack must be positive, got {self.slack!r}")
        for j, (a, b) in enumerate(self.constraints):
            _check_observable(a, f"constraint matrix {j}")
            if not -1.0 - self.slack <= b <= 1.0 + self.slack:
                raise ValueError(f"constraint value {j} out of range [-1, 1]: {b!r}")


@dataclass
class SolveReport:
    optimal_value: float
    optimizer: np.ndarray
    status: str
    residual: float
    iterations: int


def _check_observable(m, name):
    m = np.asarray(m)
    if m.shape != (DIM, DIM):
        raise ValueError(f"{name} must be {DIM}x{DIM}, got shape {m.shape}")
    if np.max(np.abs(m - m.conj().T)) > 1e-12:
        raise ValueError(f"{name} is not Hermitian to 1e-12")


def _nullspace(row: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the nullspace of a single row vector."""
    n = row.size
    _, _, vt = np.linalg.svd(row.reshape(1, n))
    return vt[1:].T.copy()


def _dedupe_rows(A_rows: np.ndarray, b: np.ndarray) -> tuple:
    """Drop constraint rows that are exact consequences of the kept ones.

    Probability-table systems are heavily redundant; stacking parallel
    barrier walls both wastes barrier weight (inflating the path length)
    and degrades the Newton conditioning.  A row is dropped only when its
    coefficient vector lies in the span of the kept rows AND the implied
    right-hand side matches to 1e-11; a dropped row is then enforced up to
    a small multiple of the slack through the rows that imply it, which
    only ever relaxes the feasible set, keeping reported bounds safe.
    """
    kept: list[int] = []
    for j in range(A_rows.shape[0]):
        if not kept:
            if np.linalg.norm(A_rows[j]) > 1e-12:
                kept.append(j)
            continue
        K = A_rows[kept]
        coeff, *_ = np.linalg.lstsq(K.T, A_rows[j], rcond=None)
        if np.linalg.norm(A_rows[j] - coeff @ K) > 1e-10:
            kept.append(j)
        elif abs(b[j] - coeff @ b[kept]) > 1e-11:
            # dependent direction with conflicting value: keep it and let
            # the slack boxes arbitrate (or diagnose infeasibility)
            kept.append(j)
    return A_rows[kept], b[kept]


class _BarrierModel:
    """Barrier function pieces for one phase of the solver.

    Variables y live in R^n.  The model consists of an objective bundle
    (value, gradient, constant-Hessian flag), optional linear inequalities
    C y - d > 0, and an optional PSD block rho(y) = sum_i y_i psd_mats[i].
    """

    def __init__(self, n, obj_grad_hess, C=None, d=None, psd_mats=None):
        self.n = n
        self.obj = obj_grad_hess
        self.C = C if C is not None else np.zeros((0, n))
        self.d = d if d is not None else np.zeros(0)
        self.psd_mats = psd_mats
        self.nu = self.C.shape[0] + (DIM if psd_mats is not None else 0)

    def feasible(self, y):
        if self.C.shape[0] and np.min(self.C @ y - self.d) <= 0.0:
            return False
        if self.psd_mats is not None:
            rho = np.tensordot(y, self.psd_mats, axes=(0, 0))
            try:
                np.linalg.cholesky(rho)
            except np.linalg.LinAlgError:
                return False
        return True

    def barrier(self, y, t, f_ref=0.0):
        """Value, gradient and Hessian of t*(f(y) - f_ref) + barrier(y).

        The reference shift keeps the value O(nu) near the central path so
        that line-search comparisons stay meaningful in floating point even
        at large t; gradients and Hessians are unaffected.
        """
        f, g, H = self.obj(y)
        val = t * (f - f_ref)
        grad = t * g
        hess = t * H
        if self.C.shape[0]:
            gaps = self.C @ y - self.d
            val -= float(np.sum(np.log(gaps)))
            inv = 1.0 / gaps
            grad = grad - self.C.T @ inv
            hess = hess + (self.C.T * (inv * inv)) @ self.C
        if self.psd_mats is not None:
            rho = np.tensordot(y, self.psd_mats, axes=(0, 0))
            sign, logdet = np.linalg.slogdet(rho)
            val -= logdet
            P = np.linalg.inv(rho)
            M = np.einsum("ab,kbc->kac", P, self.psd_mats)
            grad = grad - np.einsum("kaa->k", M).real
            hess = hess + np.einsum("kab,lba->kl", M, M).real
        return val, grad, hess


def _center(model, y, t, N, newton_budget):
    """Newton centering of t*f + barrier on the affine slice y = y + N z.

    Returns (y, steps_used, converged).
    """
    steps = 0
    stalls = 0
    f_ref, _, _ = model.obj(y)
    while steps < newton_budget:
        val, grad, hess = model.barrier(y, t, f_ref)
        Hz = N.T @ hess @ N
        gz = N.T @ grad
        jitter = 0.0
        scale = max(np.trace(Hz) / Hz.shape[0], 1.0)
        for _ in range(12):
            try:
                L = np.linalg.cholesky(Hz + jitter * np.eye(Hz.shape[0]))
                break
            except np.linalg.LinAlgError:
                jitter = max(jitter * 10.0, 1e-14 * scale)
        else:
            return y, steps, False
        dz = -np.linalg.solve(L.T, np.linalg.solve(L, gz))
        lam2 = float(-gz @ dz)
        if lam2 / 2.0 <= CENTER_TOL:
            return y, steps, True
        dy = N @ dz
        alpha = 1.0
        for _ in range(80):
            if model.feasible(y + alpha * dy):
                break
            alpha *= 0.5
        else:
            return y, steps, False
        # Armijo backtracking; smaller steps stay feasible by convexity
        base = val
        slope = float(grad @ dy)
        for _ in range(60):
            trial, _, _ = _value_only(model, y + alpha * dy, t, f_ref)
            if trial <= base + 0.25 * alpha * slope:
                break
            alpha *= 0.5
        y = y + alpha * dy
        steps += 1
        # floating-point stagnation: no measurable barrier decrease left
        if base - trial < 1e-13 * (1.0 + abs(base)):
            stalls += 1
            if stalls >= 2:
                return y, steps, bool(lam2 <= 1e-6)
        else:
            stalls = 0
    # budget exhausted; report whether we are already well centered
    _, grad, hess = model.barrier(y, t)
    gz = N.T @ grad
    return y, steps, bool(np.linalg.norm(gz) < 1e-6)


def _value_only(model, y, t, f_ref=0.0):
    f, _, _ = model.obj(y)
    val = t * (f - f_ref)
    if model.C.shape[0]:
        gaps = model.C @ y - model.d
        if np.min(gaps) <= 0:
            return np.inf, None, None
        val -= float(np.sum(np.log(gaps)))
    if model.psd_mats is not None:
        rho = np.tensordot(y, model.psd_mats, axes=(0, 0))
        sign, logdet = np.linalg.slogdet(rho)
        if sign <= 0:
            return np.inf, None, None
        val -= logdet
    return val, None, None


def _path_follow(model, y0, N, newton_budget, stop_when=None, gap_tol=GAP_TOL):
    """Run the outer path-following loop.  Returns (y, gap, steps, converged).

    ``stop_when`` may inspect the current iterate and abort the loop early
    (used by the feasibility phase once a strictly feasible point is found).
    """
    y = y0
    t = 1.0
    steps_total = 0
    converged = False
    centered = None  # (y, gap) at the last successfully centered path point
    while steps_total < newton_budget:
        y, used, ok = _center(model, y, t, N, newton_budget - steps_total)
        steps_total += used
        if stop_when is not None and stop_when(y):
            return y, model.nu / t, steps_total, True
        if not ok:
            # float64 cannot center this decade; bisect back toward the
            # last centered point, then accept its certificate if usable
            if centered is not None:
                t_lo, t_hi = model.nu / centered[1], t
                y_b = centered[0]
                for _ in range(3):
                    if steps_total >= newton_budget or centered[1] <= max(gap_tol, RELAXED_GAP):
                        break
                    t_mid = math.sqrt(t_lo * t_hi)
                    y_try, used, ok_mid = _center(
                        model, y_b, t_mid, N, newton_budget - steps_total
                    )
                    steps_total += used
                    if ok_mid:
                        centered = (y_try, model.nu / t_mid)
                        y_b, t_lo = y_try, t_mid
                    else:
                        t_hi = t_mid
                if centered[1] <= max(gap_tol, RELAXED_GAP):
                    y, gap = centered
                    return y, gap, steps_total, True
            break
        gap = model.nu / t
        centered = (y, gap)
        if gap <= gap_tol:
            converged = True
            break
        t /= PATH_REDUCTION
    return y, model.nu / t, steps_total, converged


def _linear_obj(c):
    c = np.asarray(c, dtype=float)
    H = np.zeros((c.size, c.size))

    def f(y):
        return float(c @ y), c, H

    return f


def _quadratic_obj(rows):
    rows = np.asarray(rows, dtype=float)
    H = 2.0 * rows.T @ rows

    def f(y):
        vals = rows @ y
        return float(vals @ vals), 2.0 * rows.T @ vals, H

    return f


def _box_rows(A_rows, b, slack, n, extra=0):
    """Inequality rows for |a_j . x - b_j| <= slack, padded with `extra` zero columns."""
    m = A_rows.shape[0]
    if m == 0:
        return np.zeros((0, n + extra)), np.zeros(0)
    pad = np.zeros((m, extra))
    C = np.vstack([np.hstack([A_rows, pad]), np.hstack([-A_rows, pad])])
    d = np.concatenate([b - slack, -(b + slack)])
    return C, d


def _feasible_start(A_rows, b, slack, budget):
    """Find a strictly feasible x (box interior, rho(x) > 0) or diagnose infeasibility.

    Returns (x, steps_used, status) with status None on success.
    """
    x_mm = _TRACE_ROW / DIM  # coordinates of the maximally mixed state
    steps = 0
    m = A_rows.shape[0]
    if m == 0:
        return x_mm, steps, None

    N = _nullspace(_TRACE_ROW)
    # least-squares point on the affine slice
    rhs = b - A_rows @ x_mm
    z, *_ = np.linalg.lstsq(A_rows @ N, rhs, rcond=None)
    x_ls = x_mm + N @ z
    resid = np.max(np.abs(A_rows @ x_ls - b))

    if resid >= 0.9 * slack:
        # phase A: minimize the worst affine residual u over the trace slice
        n_y = N_COORDS + 1
        Cu = np.hstack([-A_rows, np.ones((m, 1))])
        Cl = np.hstack([A_rows, np.ones((m, 1))])
        C = np.vstack([Cu, Cl])
        d = np.concatenate([-b, b])
        model = _BarrierModel(n_y, _linear_obj(np.eye(n_y)[-1]), C, d)
        y0 = np.concatenate([x_ls, [resid * 1.1 + 1e-6]])
        N_y = np.zeros((n_y, N.shape[1] + 1))
        N_y[:N_COORDS, : N.shape[1]] = N
        N_y[-1, -1] = 1.0
        y, gap, used, ok = _path_follow(model, y0, N_y, budget)
        steps += used
        if float(y[-1]) >= slack:
            # certified min worst-residual is within `gap` of this, so the
            # box interior is empty (or too thin to navigate)
            return None, steps, STATUS_INFEASIBLE if ok else STATUS_MAX_ITERATIONS
        x_ls = y[:N_COORDS]

    lam_min = float(np.linalg.eigvalsh(from_coords(x_ls)).min())
    if lam_min >= 1e-6:
        return x_ls, steps, None

    # phase B: maximize the smallest eigenvalue s of rho(x) inside the box
    n_y = N_COORDS + 1
    C, d = _box_rows(A_rows, b, slack, N_COORDS, extra=1)
    psd = np.concatenate([_BASIS, -np.eye(DIM, dtype=complex)[None, :, :]])
    model = _BarrierModel(n_y, _linear_obj(-np.eye(n_y)[-1]), C, d, psd_mats=psd)
    y0 = np.concatenate([x_ls, [lam_min - 1.0]])
    N_y = np.zeros((n_y, N.shape[1] + 1))
    N_y[:N_COORDS, : N.shape[1]] = N
    N_y[-1, -1] = 1.0
    y, gap, used, ok = _path_follow(
        model, y0, N_y, budget - steps, stop_when=lambda yy: yy[-1] >= 1e-6
    )
    steps += used
    s = float(y[-1])
    x = y[:N_COORDS]
    if ok and s + gap < -INFEASIBILITY_TOL:
        return None, steps, STATUS_INFEASIBLE
    if float(np.linalg.eigvalsh(from_coords(x)).min()) <= 0.0:
        # converged onto a set with (numerically) empty PSD interior, or
        # stalled before reaching one
        return None, steps, STATUS_INFEASIBLE if ok else STATUS_MAX_ITERATIONS
    return x, steps, None


def _solve(problem: ConicProblem, obj_rows, sense, gap_tol) -> SolveReport:
    """Shared driver: sense is 'min'/'max' for linear rows, 'sumsq' for quadratic."""
    A_rows = (
        np.array([to_coords(a) for a, _ in problem.constraints])
        if problem.constraints
        else np.zeros((0, N_COORDS))
    )
    b = np.array([float(v) for _, v in problem.constraints])
    A_rows, b = _dedupe_rows(A_rows, b)

    x0, steps, status = _feasible_start(A_rows, b, problem.slack, MAX_NEWTON_STEPS)
    if status is not None:
        return SolveReport(np.nan, from_coords(_TRACE_ROW / DIM), status, np.inf, steps)

    if sense == "sumsq":
        obj = _quadratic_obj(obj_rows)
        flip = 1.0
    else:
        flip = -1.0 if sense == "max" else 1.0
        obj = _linear_obj(flip * obj_rows)

    C, d = _box_rows(A_rows, b, problem.slack, N_COORDS)
    model = _BarrierModel(N_COORDS, obj, C, d, psd_mats=_BASIS)
    N = _nullspace(_TRACE_ROW)
    y, gap, used, ok = _path_follow(
        model, x0, N, MAX_NEWTON_STEPS - steps, gap_tol=gap_tol
    )
    steps += used

    rho = from_coords(y)
    rho = 0.5 * (rho + rho.conj().T)
    raw, _, _ = obj(y)
    gap_cert = gap + 10.0 * CENTER_TOL + 1e-9
    # adjust by the certified gap so the report bounds the true optimum safely
    value = flip * (raw - gap_cert)
    status = STATUS_OPTIMAL if ok else STATUS_MAX_ITERATIONS
    return SolveReport(float(value), rho, status, float(gap_cert), steps)


def solve_linear(problem: ConicProblem, gap_tol: float = GAP_TOL) -> SolveReport:
    """Extremize Tr(M rho) over the constrained spectrahedron.

    For maximization the reported value is an upper bound on every feasible
    value (and symmetrically for minimization), accurate to the certified
    duality gap recorded in ``residual``.
    """
    if not isinstance(problem.objective, LinearObjective):
        raise TypeError("solve_linear needs a LinearObjective")
    rows = to_coords(problem.objective.matrix)
    return _solve(problem, rows, problem.objective.sense, gap_tol)


def solve_min_sum_squares(problem: ConicProblem, gap_tol: float = GAP_TOL) -> SolveReport:
    """Minimize sum_k Tr(M_k rho)^2 over the constrained spectrahedron.

    The reported value is a lower bound on the true minimum, accurate to the
    certified duality gap recorded in ``residual``.
    """
    if not isinstance(problem.objective, QuadraticObjective):
        raise TypeError("solve_min_sum_squares needs a QuadraticObjective")
    rows = np.array([to_coords(t) for t in problem.objective.terms])
    return _solve(problem, rows, "sumsq", gap_tol)
