"""JIT-compiled inner loop of the dual barrier path-following solver.

The dual slack is Z = C - H diag(y) H^H with C fixed per solve, so with
S = H^H C^-1 H precomputed every Newton quantity lives in the m-dimensional
constraint space via the Woodbury identity:

    K(y) = diag(1/y) - S,   Z > 0  iff  K > 0   (C > 0),
    H^H Z^-1 H = S + S K^-1 S.

Falls back to plain Python when numba is unavailable (slow but identical
arithmetic).
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is expected in the environment
    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap


@njit(cache=True)
def _chol(a):
    """Cholesky of a Hermitian matrix; ok=False when not positive definite."""
    n = a.shape[0]
    low = np.zeros_like(a)
    for i in range(n):
        s = a[i, i].real
        for k in range(i):
            s -= (low[i, k] * np.conj(low[i, k])).real
        if s <= 0.0:
            return low, False
        low[i, i] = np.sqrt(s)
        for j in range(i + 1, n):
            c = a[j, i]
            for k in range(i):
                c -= low[j, k] * np.conj(low[i, k])
            low[j, i] = c / low[i, i]
    return low, True


@njit(cache=True)
def _chol_solve(low, b):
    """Solve (L L^H) X = B with L lower triangular, B of shape (n, k)."""
    n, k = b.shape
    x = b.copy()
    for col in range(k):
        for i in range(n):
            c = x[i, col]
            for j in range(i):
                c -= low[i, j] * x[j, col]
            x[i, col] = c / low[i, i]
        for i in range(n - 1, -1, -1):
            c = x[i, col]
            for j in range(i + 1, n):
                c -= np.conj(low[j, i]) * x[j, col]
            x[i, col] = c / np.conj(low[i, i])
    return x


@njit(cache=True)
def _kmat(s_mat, y):
    m = y.shape[0]
    k = -s_mat.copy()
    for j in range(m):
        k[j, j] += 1.0 / y[j]
    return 0.5 * (k + np.conj(k).T)


@njit(cache=True)
def _newton_quantities(s_mat, low, y, mu):
    """Gradient and Hessian of the barrier objective at y for weight mu."""
    m = y.shape[0]
    w = _chol_solve(low, s_mat)            # K^-1 S
    t_mat = s_mat + s_mat @ w              # H^H Z^-1 H in constraint space
    grad = np.empty(m)
    for j in range(m):
        grad[j] = 1.0 - mu * t_mat[j, j].real + mu / y[j]
    hess = np.empty((m, m))
    for a in range(m):
        for b in range(m):
            v = t_mat[a, b]
            hess[a, b] = mu * (v.real * v.real + v.imag * v.imag)
        hess[a, a] += mu / (y[a] * y[a])
    return grad, hess


@njit(cache=True)
def _spd_solve(hess, grad):
    """Damped Cholesky solve of the (real SPD up to roundoff) Newton system."""
    m = grad.shape[0]
    scale = 0.0
    for j in range(m):
        if hess[j, j] > scale:
            scale = hess[j, j]
    damp = 1e-14 * scale + 1e-300
    for _ in range(8):
        a = hess.astype(np.complex128)
        for j in range(m):
            a[j, j] += damp
        low, ok = _chol(a)
        if ok:
            rhs = grad.astype(np.complex128).reshape(m, 1)
            sol = _chol_solve(low, rhs)
            return sol[:, 0].real
        damp *= 100.0
    return grad / (scale + 1e-300)


@njit(cache=True)
def _line_search(s_mat, y, step):
    alpha = 1.0
    for _ in range(60):
        ok = True
        y_new = y + alpha * step
        for j in range(y.shape[0]):
            if y_new[j] <= 0.0:
                ok = False
                break
        if ok:
            low, okc = _chol(_kmat(s_mat, y_new))
            if okc:
                return y_new, low, alpha, True
        alpha *= 0.5
    return y, np.zeros_like(s_mat), 0.0, False


@njit(cache=True)
def dual_path(s_mat, y0, mu0, target_mu, grad_tol, iter_cap):
    """Walk the dual central path down to target_mu, then polish the centering.

    Returns (y, status): status 0 = ok, 1 = initial point infeasible,
    2 = iteration cap exceeded.
    """
    y = y0.copy()
    low, ok = _chol(_kmat(s_mat, y))
    if not ok:
        return y, 1
    mu = mu0
    iters = 0

    while mu > target_mu:
        mu = mu * 0.35
        if mu < target_mu:
            mu = target_mu
        for _ in range(200):
            iters += 1
            if iters > iter_cap:
                return y, 2
            grad, hess = _newton_quantities(s_mat, low, y, mu)
            step = _spd_solve(hess, grad)
            dec = grad @ step
            y_new, low_new, alpha, accepted = _line_search(s_mat, y, step)
            if not accepted:
                break
            y = y_new
            low = low_new
            if alpha == 1.0 and dec < 0.01:
                break

    best_g = 1e300
    best_y = y.copy()
    stall = 0
    for _ in range(150):
        iters += 1
        if iters > iter_cap:
            break
        grad, hess = _newton_quantities(s_mat, low, y, mu)
        gnorm = np.max(np.abs(grad))
        if gnorm <= grad_tol:
            return y, 0
        if gnorm < best_g:
            best_g = gnorm
            best_y = y.copy()
            stall = 0
        else:
            stall += 1
        if stall >= 6:
            break
        step = _spd_solve(hess, grad)
        y_new, low_new, alpha, accepted = _line_search(s_mat, y, step)
        if not accepted:
            break
        y = y_new
        low = low_new
    return best_y, 0
