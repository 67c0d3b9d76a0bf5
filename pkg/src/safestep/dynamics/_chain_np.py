"""Pure-numpy planar-chain kernels (fallback for the compiled extension).

All functions take the constant coefficient arrays from
params.chain_coefficients plus joint positions/velocities. Working in
absolute angles theta = cumsum(q), the chain quantities are

    M[k,l]   = P[k,l] cos(theta_k - theta_l) + delta_kl * inertia_k
    Cth[k,l] = P[k,l] sin(theta_k - theta_l) * thetadot_l
    Gth[k]   = -g0 * grav[k] * sin(theta_k)

and the joint-coordinate matrices are L^T (.) L with L the lower
triangular matrix of ones, i.e. reversed 2-d cumulative sums. Cth is the
Christoffel-symbol Coriolis matrix, so Mdot - 2C is skew symmetric.
"""

import numpy as np

_DIAG = np.arange(5)


def _lt_x_l(X):
    # L^T X L: (i,j) -> sum over k>=i, l>=j of X[k,l]
    Y = np.cumsum(X[::-1, :], axis=0)[::-1, :]
    return np.ascontiguousarray(np.cumsum(Y[:, ::-1], axis=1)[:, ::-1])


def _lt_v(v):
    return np.cumsum(v[::-1])[::-1]


def dcg(P, inertia, grav, g0, q, qd):
    """Mass matrix, Coriolis matrix and gravity vector in joint coords."""
    th = np.cumsum(q)
    om = np.cumsum(qd)
    dth = th[:, None] - th[None, :]
    M = P * np.cos(dth)
    M[_DIAG, _DIAG] += inertia
    Cth = P * np.sin(dth) * om[None, :]
    Gth = -g0 * grav * np.sin(th)
    return _lt_x_l(M), _lt_x_l(Cth), _lt_v(Gth)


def bias(P, inertia, grav, g0, q, qd):
    """C(q, qd) qd + G(q) without materializing C."""
    th = np.cumsum(q)
    om = np.cumsum(qd)
    dth = th[:, None] - th[None, :]
    bth = (P * np.sin(dth)) @ (om * om)
    gth = -g0 * grav * np.sin(th)
    return _lt_v(bth + gth)


def mass_matrix(P, inertia, grav, g0, q):
    th = np.cumsum(q)
    dth = th[:, None] - th[None, :]
    M = P * np.cos(dth)
    M[_DIAG, _DIAG] += inertia
    return _lt_x_l(M)


def accel(P, inertia, grav, g0, q, qd, tau):
    """Joint accelerations for a generalized force vector tau."""
    D = mass_matrix(P, inertia, grav, g0, q)
    b = bias(P, inertia, grav, g0, q, qd)
    return np.linalg.solve(D, tau - b)


def rhs(P, inertia, grav, g0, x, tau, out=None):
    """State derivative (qd, qdd) for the flat state x = (q, qd)."""
    q = x[:5]
    qd = x[5:]
    qdd = accel(P, inertia, grav, g0, q, qd, tau)
    if out is None:
        out = np.empty(10)
    out[:5] = qd
    out[5:] = qdd
    return out
