"""Small dense projection QPs: minimize 0.5*||u - u_d||^2 subject to A u >= b.

Every controller variant in this package reduces to an instance of this
problem with at most a couple of constraint rows, so the solver is a plain
primal active-set iteration whose equality subproblems are solved by the
normal equations of the projection. That keeps it exact (up to roundoff)
in finitely many steps for these sizes.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible, NumericalFailure

TOL_FEAS = 1e-9
TOL_OBJ = 1e-9

# Rows whose squared norm falls below this are treated as all-zero.
_ZERO_ROW = 1e-14
# Relative eigenvalue ratio below which the working-set Gram matrix is
# considered rank deficient.
_RANK_EPS = 1e-12


@dataclass
class ProjectionQP:
    """Problem data: nominal input u_d and half-space rows A u >= b."""

    u_d: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.u_d = np.atleast_1d(np.asarray(self.u_d, dtype=float))
        self.A = np.asarray(self.A, dtype=float).reshape(-1, self.u_d.size)
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if self.u_d.ndim != 1 or self.u_d.size < 1:
            raise ValueError("u_d must be a nonempty vector")
        if self.b.shape[0] != self.A.shape[0]:
            raise ValueError("A and b row counts disagree")
        if not (np.all(np.isfinite(self.u_d)) and np.all(np.isfinite(self.A))
                and np.all(np.isfinite(self.b))):
            raise ValueError("QP data must be finite")

    @property
    def m(self):
        return self.u_d.size

    @property
    def k(self):
        return self.A.shape[0]


@dataclass
class QPSolution:
    u_star: np.ndarray
    active_set: list = field(default_factory=list)
    objective: float = 0.0


def _equality_projection(u_d, A_w, b_w):
    """Project u_d onto {u : A_w u = b_w} via the normal equations.

    Returns (u, lam, gram_ok) where lam are the equality multipliers and
    gram_ok is False when A_w A_w^T is rank deficient.
    """
    G = A_w @ A_w.T
    resid = b_w - A_w @ u_d
    eig = np.linalg.eigvalsh(G)
    gram_ok = eig[0] > _RANK_EPS * max(eig[-1], 1.0)
    if gram_ok:
        lam = np.linalg.solve(G, resid)
    else:
        lam = np.linalg.lstsq(G, resid, rcond=None)[0]
    u = u_d + A_w.T @ lam
    return u, lam, gram_ok


def solve_projection_qp(qp, tol=TOL_FEAS, max_iter=None):
    """Minimize 0.5*||u - u_d||^2 over {u : A u >= b}.

    Active-set iteration starting from the unconstrained optimum: add the
    most violated row (lowest index on ties), drop rows with negative
    multipliers, and certify infeasibility through a Farkas combination
    when a dependent row cannot be satisfied.

    Raises Infeasible when the polyhedron is empty and NumericalFailure if
    the iteration fails to settle (conditioning pathology).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    u_d, A, b = qp.u_d, qp.A, qp.b

    # Degenerate zero rows: 0 >= b is vacuous for b <= 0, impossible otherwise.
    row_norm2 = np.einsum("ij,ij->i", A, A)
    keep = row_norm2 > _ZERO_ROW
    if np.any(~keep & (b > tol)):
        raise Infeasible("zero constraint row with positive right-hand side")
    idx_map = np.flatnonzero(keep)
    A, b = A[keep], b[keep]

    if A.shape[0] == 0:
        return QPSolution(u_star=u_d.copy(), active_set=[],
                          objective=0.0)

    work = []  # indices into the filtered rows, insertion-ordered
    u = u_d.copy()
    if max_iter is None:
        max_iter = 8 * (A.shape[0] + 2) ** 2
    for _ in range(max_iter):
        if work:
            A_w = A[work]
            u, lam, gram_ok = _equality_projection(u_d, A_w, b[work])
            if not gram_ok:
                # Dependent working set: consistent -> drop a redundant row,
                # inconsistent -> the equalities (hence the path that forced
                # them) cannot hold; check a Farkas certificate below.
                if np.max(np.abs(A_w @ u - b[work])) > 1e2 * tol:
                    raise Infeasible(
                        "inconsistent dependent active rows",
                        rows=[int(idx_map[i]) for i in work])
                drop = int(np.argmin(lam))
                del work[drop]
                continue
            if np.min(lam) < -tol:
                drop = int(np.argmin(lam))
                del work[drop]
                continue
        violation = A @ u - b
        worst = int(np.argmin(violation))
        if violation[worst] >= -tol:
            active = [int(idx_map[i]) for i in work]
            return QPSolution(u_star=u, active_set=sorted(active),
                              objective=0.5 * float(np.dot(u - u_d, u - u_d)))
        if worst in work:
            raise NumericalFailure("working-set row re-violated; "
                                   "conditioning below threshold")
        if work:
            # Is the new normal dependent on the working rows?
            A_w = A[work]
            mu, res, _, _ = np.linalg.lstsq(A_w.T, A[worst], rcond=None)
            if res.size and res[0] > _ZERO_ROW:
                dependent = False
            else:
                dependent = np.linalg.norm(A_w.T @ mu - A[worst]) < 1e-9
            if dependent:
                if np.all(mu <= tol):
                    # a_worst = sum(mu_i a_i) with mu <= 0: satisfying the
                    # working rows caps a_worst u below b_worst for every u.
                    raise Infeasible(
                        "violated row opposes active rows",
                        rows=[int(idx_map[i]) for i in work]
                             + [int(idx_map[worst])])
                del work[int(np.argmax(mu))]
                work.append(worst)
                continue
        work.append(worst)
    raise NumericalFailure("active-set iteration did not converge")


def check_kkt(qp, sol, tol=1e-8):
    """True iff sol satisfies all four KKT conditions of qp within tol."""
    u = np.asarray(sol.u_star, dtype=float)
    if u.shape != qp.u_d.shape:
        raise ValueError("solution dimension mismatch")
    slack = qp.A @ u - qp.b if qp.k else np.zeros(0)
    if slack.size and np.min(slack) < -tol:
        return False  # primal feasibility

    # Stationarity: u - u_d = A^T lambda with lambda >= 0 supported on the
    # active rows. Recover lambda from the active set by least squares.
    grad = u - qp.u_d
    active = [i for i in range(qp.k) if slack[i] <= tol]
    if not active:
        return bool(np.linalg.norm(grad) <= tol)
    A_a = qp.A[active]
    lam = np.linalg.lstsq(A_a.T, grad, rcond=None)[0]
    if np.min(lam) < -tol:
        return False  # dual feasibility
    if np.linalg.norm(A_a.T @ lam - grad) > tol:
        return False  # stationarity
    comp = lam * slack[active]
    return bool(np.max(np.abs(comp), initial=0.0) <= tol)
