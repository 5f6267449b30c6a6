"""In-repo convex solvers for the transceiver subproblems.

Two problem shapes only:

* the combiner SDP with a linearized rank-one penalty,
      min  sum_m w_m h_m^H F h_m + sigma_z^2 tr(F) + rho tr(F (I - zeta zeta^H))
      s.t. h_m^H F h_m >= b_m,  F >= 0,
  solved by interior-point path following on the dual log barrier with the
  primal recovered from the barrier gradient (F = mu Z^-1 on the central path);

* the small dense LP over artificial-noise powers, solved exactly by a
  bounded-variable simplex (the optimal vertex is its own certificate).

Both are deterministic; SDP tolerances default to 1e-8 with a hard iteration
cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _sdp_kernel
from .model import Array


class Infeasible(Exception):
    """The feasible region is empty."""


class NumericalFailure(Exception):
    """Tolerance not reached within the iteration cap."""


class RankTooHigh(Exception):
    """Second eigenvalue too large for a trustworthy rank-one factorization."""


ITER_CAP = 200
DEFAULT_TOL = 1e-8

# When set to a path, every linearization iterate is appended there as a JSON
# line (objective, trace gap, tau) for offline debugging.
DEBUG_DUMP_PATH: str | None = None


def _debug_dump(record: dict) -> None:
    if DEBUG_DUMP_PATH:
        import json

        with open(DEBUG_DUMP_PATH, "a") as fh:
            fh.write(json.dumps(record) + "\n")


# ---------------------------------------------------------------------------
# SDP subproblem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SdpSubproblem:
    """min sum_m w_m h_m^H F h_m + tau_weight tr(F) + penalty tr(F (I - zeta zeta^H))
    s.t. h_m^H F h_m >= b_m, F >= 0; tau = tr(F)."""

    channels: Array        # N x M, column m is h_m (rank-one factor of each cost/constraint matrix)
    noise_weights: Array   # w_m = s2_m^2 >= 0
    tau_weight: float      # sigma_z^2 > 0
    lower_bounds: Array    # b_m, combined right sides of the DP and power families
    penalty: float         # rho >= 0
    direction: Array       # zeta, current unit-norm linearization direction

    def cost_matrix(self) -> Array:
        h = self.channels
        n = h.shape[0]
        zeta = self.direction / np.linalg.norm(self.direction)
        c = (h * self.noise_weights[None, :]) @ h.conj().T
        c += (self.tau_weight + self.penalty) * np.eye(n)
        c -= self.penalty * np.outer(zeta, zeta.conj())
        return 0.5 * (c + c.conj().T)


def sdp_objective(p: SdpSubproblem, f_mat: Array) -> float:
    """Unpenalized objective sum_m w_m h_m^H F h_m + sigma_z^2 tr(F)."""
    quads = np.real(np.einsum("im,ij,jm->m", p.channels.conj(), f_mat, p.channels))
    return float(quads @ p.noise_weights + p.tau_weight * np.real(np.trace(f_mat)))


def penalized_objective(p: SdpSubproblem, f_mat: Array, rho: float) -> float:
    tau = float(np.real(np.trace(f_mat)))
    spectral = float(np.linalg.eigvalsh(f_mat)[-1])
    return sdp_objective(p, f_mat) + rho * (tau - spectral)


def _feasibility_probe(p: SdpSubproblem) -> None:
    active = p.lower_bounds > 0
    norms = np.sum(np.abs(p.channels) ** 2, axis=0)
    if np.any(active & (norms <= 0)):
        raise Infeasible("a positive trace lower bound sits on a zero channel")


def solve_sdp_mm_step(p: SdpSubproblem, tol: float = DEFAULT_TOL) -> tuple:
    """One convex step of the penalized problem at the current linearization direction.

    Returns (F, tau) with KKT residuals below tol (relative to the problem scale).
    """
    f_mat, tau = _solve_sdp_core(p, tol)
    return f_mat, tau


def _solve_sdp_core(p: SdpSubproblem, tol: float) -> tuple:
    _feasibility_probe(p)
    h = p.channels
    n, m_all = h.shape
    c_mat = p.cost_matrix()

    active = np.where(p.lower_bounds > 0)[0]
    if active.size == 0:
        # Every constraint is vacuous for F >= 0; the floor tr(F) >= 1e-12 stands in
        # for the open constraint F != 0.
        f_mat = 1e-12 / n * np.eye(n, dtype=complex)
        return f_mat, float(np.real(np.trace(f_mat)))

    b = p.lower_bounds[active].astype(float)
    m = active.size
    # Normalize every trace constraint to right side 1 (h <- h / sqrt(b)); this
    # equalizes constraint scales no matter how spread the demands are.
    ha = np.ascontiguousarray(h[:, active] / np.sqrt(b)[None, :], dtype=np.complex128)
    gains = np.maximum(np.sum(np.abs(ha) ** 2, axis=0), 1e-300)

    sigma_floor = p.tau_weight  # lambda_min(C) >= tau_weight since the rest is PSD
    y0 = np.full(m, 0.25 * sigma_floor / m) / gains

    # Initial gap estimate sets the barrier weight.
    t0 = 2.0 * float(np.max(1.0 / gains))
    gap0 = abs(np.real(np.trace(c_mat)) * t0 - float(y0.sum())) + 1.0
    mu0 = gap0 / (n + m)

    # Gap error grows with mu while the F = mu Z^-1 recovery precision degrades
    # like eps/mu; mu ~ sqrt(eps) * scale balances the two, so tolerances below
    # ~1e-8 relative are not honored.
    eff_tol = max(tol, 5e-9)
    target_mu = eff_tol * max(1.0, gap0) / (2.0 * (n + m))

    c128 = np.ascontiguousarray(c_mat, dtype=np.complex128)
    cinv_h = np.linalg.solve(c128, ha)
    s_mat = np.ascontiguousarray(ha.conj().T @ cinv_h)
    s_mat = 0.5 * (s_mat + s_mat.conj().T)

    def recover(y_vec, mu_val):
        z_mat = c128 - (ha * y_vec[None, :]) @ ha.conj().T
        z_mat = 0.5 * (z_mat + z_mat.conj().T)
        f_rec = mu_val * np.linalg.inv(z_mat)
        f_rec = 0.5 * (f_rec + f_rec.conj().T)
        quads = np.real(np.einsum("im,ij,jm->m", ha.conj(), f_rec, ha))
        infl = float(np.max(1.0 / np.maximum(quads, 1e-300)))
        if infl > 1.0:
            if infl > 1.001:
                raise NumericalFailure("primal recovery violated a constraint")
            f_rec = f_rec * infl
        return f_rec

    # The a-priori gap estimate can overshoot by orders of magnitude, so refine
    # the barrier target against the realized objective until the measured
    # duality gap closes, keeping the best iterate (the walk can wobble when
    # restarted from a boundary point).
    y = y0
    mu_start = mu0
    best = None
    for _ in range(6):
        y, status = _sdp_kernel.dual_path(s_mat, y, mu_start, target_mu, eff_tol, ITER_CAP * 20)
        if status == 1:
            raise NumericalFailure("initial dual point not strictly feasible")
        if status == 2:
            raise NumericalFailure("SDP iteration cap exceeded")
        f_mat = recover(y, target_mu)
        primal_obj = float(np.real(np.vdot(f_mat, c_mat)))
        gap = primal_obj - float(y.sum())
        rel_gap = gap / (1.0 + abs(primal_obj))
        if best is None or rel_gap < best[0]:
            best = (rel_gap, f_mat)
        if best[0] <= 1e-4:
            f_best = best[1]
            tau = float(np.real(np.trace(f_best)))
            return f_best, max(tau, 1e-12)
        mu_start = target_mu
        target_mu = max(
            eff_tol * max(1.0, abs(primal_obj)) / (2.0 * (n + m)), 1e-14 * target_mu
        )
    raise NumericalFailure("duality gap did not close")


def _phase_fixed(vec: Array) -> Array:
    pivot = int(np.argmax(np.abs(vec)))
    phase = vec[pivot] / abs(vec[pivot])
    return vec / phase


def principal_eigvec(f_mat: Array) -> Array:
    """Unit principal eigenvector; ties resolved toward the first canonical axes,
    phase fixed so the largest-modulus entry is real positive."""
    eigvals, eigvecs = np.linalg.eigh(f_mat)
    top = eigvals[-1]
    tol = 1e-12 * max(1.0, abs(top))
    span = eigvecs[:, eigvals >= top - tol]
    vec = None
    for axis in range(f_mat.shape[0]):
        proj = span @ span[axis, :].conj()
        norm = np.linalg.norm(proj)
        if norm > 1e-6:
            vec = proj / norm
            break
    if vec is None:
        vec = span[:, -1]
    return _phase_fixed(vec)


def rank_one_factor(f_mat: Array, tau: float) -> tuple:
    """(f0, eta) from a near-rank-one PSD matrix; eta = 1/tau."""
    eigvals = np.linalg.eigvalsh(f_mat)
    lam1 = float(eigvals[-1])
    lam2 = float(eigvals[-2]) if f_mat.shape[0] > 1 else 0.0
    if lam1 <= 0:
        raise RankTooHigh("matrix has no positive spectrum")
    if lam2 / lam1 > 0.1:
        raise RankTooHigh(f"second eigenvalue ratio {lam2 / lam1:.3g} exceeds 0.1")
    f0 = principal_eigvec(f_mat)
    return f0, 1.0 / tau


def solve_dc_sdp(
    p: SdpSubproblem,
    rho: float,
    mm_iters: int,
    init_direction: Array,
    tol: float = DEFAULT_TOL,
) -> tuple:
    """Rank-one-penalized SDP via iterative linearization of the spectral norm.

    Returns (F, tau, trace_gap); the penalized objective is nonincreasing
    across iterations up to solver precision, and the loop exits early once it
    stalls or the linearization direction stops moving.
    """
    if mm_iters < 1:
        raise ValueError("mm_iters must be >= 1")
    zeta = np.asarray(init_direction, dtype=complex)
    zeta = zeta / np.linalg.norm(zeta)
    prev_obj = np.inf
    best = None
    # Interior-point solves land within ~sqrt(eps) of the optimum, so the MM
    # descent property is only observable to that precision; a step that fails
    # it (or fails to solve) is rejected and the loop returns the best iterate.
    mono_tol = 3e-6
    best_gap = 0.0
    for _ in range(mm_iters):
        step = replace(p, penalty=rho, direction=zeta)
        try:
            f_mat, tau = solve_sdp_mm_step(step, tol=tol)
        except NumericalFailure:
            if best is None:
                raise
            break
        eigvals, eigvecs = np.linalg.eigh(f_mat)
        lam_max = float(eigvals[-1])
        trace_gap = max(tau - lam_max, 0.0)
        obj = sdp_objective(p, f_mat) + rho * trace_gap
        _debug_dump({"objective": obj, "trace_gap": trace_gap, "tau": tau})
        if obj > prev_obj + mono_tol * max(1.0, abs(prev_obj)):
            break
        best = (f_mat, tau)
        best_gap = trace_gap
        if abs(prev_obj - obj) <= 1e-6 * max(1.0, abs(obj)):
            prev_obj = obj
            break
        prev_obj = obj
        zeta_next = _phase_fixed(eigvecs[:, -1])
        if 1.0 - abs(np.vdot(zeta_next, zeta)) <= 1e-9:
            break
        zeta = zeta_next
    f_mat, tau = best
    return f_mat, tau, best_gap


def rank_one_candidate_objective(p: SdpSubproblem, direction: Array) -> float:
    """Objective of the feasible rank-one point along `direction` (exact scalar
    line search on the trace constraints)."""
    f = direction / np.linalg.norm(direction)
    proj = np.abs(f.conj() @ p.channels) ** 2
    active = p.lower_bounds > 0
    if not np.any(active):
        return p.tau_weight * 1e-12
    if np.any(active & (proj <= 0)):
        return math.inf
    inv_eta = float(np.max(p.lower_bounds[active] / proj[active]))
    return float((proj @ p.noise_weights + p.tau_weight) * inv_eta)


def _probe_directions(p: SdpSubproblem, init_direction: Array) -> list:
    """Deterministic candidate starts: the caller's direction, the per-device
    channels, and (in two dimensions, where the landscape has decoy basins) a
    Fibonacci cover of the unit sphere."""
    n = p.channels.shape[0]
    cands = [np.asarray(init_direction, dtype=complex)]
    norms = np.linalg.norm(p.channels, axis=0)
    for j in range(p.channels.shape[1]):
        if norms[j] > 0:
            cands.append(p.channels[:, j] / norms[j])
    if n == 2:
        golden = (1 + math.sqrt(5)) / 2
        for i in range(128):
            theta = math.acos(1 - 2 * (i + 0.5) / 128)
            phase = 2 * math.pi * i / golden
            cands.append(np.array([math.cos(theta / 2),
                                   math.sin(theta / 2) * np.exp(1j * phase)]))
    return cands


def _polish_direction(p: SdpSubproblem, direction: Array, sweeps: int = 60) -> tuple:
    """Derivative-free descent of the rank-one objective on the unit sphere.

    The linearization loop's fixed points need not be stationary for the
    rank-one-restricted objective, so a cheap compass search along coordinate
    perturbations reliably claws back the last percent.
    """
    f = np.asarray(direction, dtype=complex)
    f = f / np.linalg.norm(f)
    best = rank_one_candidate_objective(p, f)
    n = f.size
    step = 0.25
    for _ in range(sweeps):
        improved = False
        for i in range(n):
            for bump in (step, -step, 1j * step, -1j * step):
                cand = f.copy()
                cand[i] += bump
                cand /= np.linalg.norm(cand)
                val = rank_one_candidate_objective(p, cand)
                if val < best * (1 - 1e-12):
                    f, best = cand, val
                    improved = True
        if not improved:
            step *= 0.5
            if step < 1e-7:
                break
    return f, best


def solve_rank_one(
    p: SdpSubproblem,
    rho: float,
    mm_iters: int,
    init_direction: Array,
    tol: float = DEFAULT_TOL,
) -> tuple:
    """Penalized-SDP solve aimed at a rank-one factor.

    Runs the linearization loop from the caller's direction, escalates the
    penalty tenfold (at most twice) when the trace gap refuses to close, and
    finishes with a sphere polish of the rank-one objective seeded by the
    loop's principal direction and a deterministic direction probe. Returns
    (F, tau, trace_gap) for the best feasible rank-one outcome found; the raw
    loop iterate is returned whenever it is at least as good.
    """
    best = None
    rho_k = rho
    for _ in range(3):
        f_mat, tau, gap = solve_dc_sdp(p, rho_k, mm_iters, init_direction, tol=tol)
        score = rank_one_candidate_objective(p, principal_eigvec(f_mat))
        closed = gap / tau <= 1e-3
        if best is None or (closed and score < best[0]):
            best = (score, f_mat, tau, gap)
        if closed:
            break
        rho_k *= 10.0

    # Low-dimensional landscapes grow decoy basins for the linearization loop;
    # a direction probe plus compass polish is nearly free there and recovers
    # them. Higher dimensions are benign and skip it.
    if p.channels.shape[0] <= 4:
        cands = _probe_directions(p, principal_eigvec(best[1]))
        scores = [rank_one_candidate_objective(p, c) for c in cands]
        seed = cands[int(np.argmin(scores))]
        f_pol, score_pol = _polish_direction(p, seed)
        if math.isfinite(score_pol) and score_pol < best[0] * (1 - 1e-9):
            proj = np.abs(f_pol.conj() @ p.channels) ** 2
            active = p.lower_bounds > 0
            inv_eta = float(np.max(p.lower_bounds[active] / proj[active]))
            f_mat = np.outer(f_pol, f_pol.conj()) * inv_eta
            best = (score_pol, f_mat, float(np.real(np.trace(f_mat))), 0.0)

    _, f_mat, tau, gap = best
    return f_mat, tau, gap


# ---------------------------------------------------------------------------
# LP subproblem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LpProblem:
    """min c.x  s.t.  G x >= r,  0 <= x <= u, with G elementwise nonnegative."""

    costs: Array             # c >= 0
    constraint_matrix: Array  # G, M x M, nonnegative
    rhs: Array               # r
    box_upper: Array         # u >= 0


def solve_lp(p: LpProblem, tol: float = DEFAULT_TOL) -> Array:
    """Exact vertex solve of the box-covering LP; raises Infeasible when empty."""
    c = np.asarray(p.costs, dtype=float)
    g = np.asarray(p.constraint_matrix, dtype=float)
    r = np.asarray(p.rhs, dtype=float)
    u = np.asarray(p.box_upper, dtype=float)
    m = c.size
    if np.any(g < -1e-12):
        raise ValueError("constraint matrix must be elementwise nonnegative")
    if np.any(u < -1e-9):
        raise Infeasible("negative box upper bound")
    u = np.maximum(u, 0.0)

    scale = max(1.0, float(np.abs(r).max(initial=0.0)), float(np.abs(g @ u).max(initial=0.0)))
    # G >= 0 makes Gx monotone in x, so x = u maximizes every row.
    if np.any(g @ u < r - tol * scale):
        raise Infeasible("noise-power demand exceeds the available power box")
    if np.all(r <= tol * scale):
        return np.zeros(m)

    free = u > tol * max(1.0, float(u.max(initial=0.0)))
    x_fix = np.zeros(m)
    r_red = r.copy()
    if not np.all(free):
        g_red = g[:, free]
        c_red = c[free]
        u_red = u[free]
    else:
        g_red, c_red, u_red = g, c, u
    n_free = int(free.sum())
    if n_free == 0:
        if np.all(r_red <= tol * scale):
            return x_fix
        raise Infeasible("all variables pinned at zero but demands remain")

    # Row-scale every kept constraint to right side 1; rows with r <= 0 already
    # hold at x = 0 since G >= 0.
    keep = r_red > 0
    if not np.any(keep):
        return x_fix
    g_unit = (g_red * u_red[None, :])[keep] / r_red[keep, None]
    c_unit = c_red * u_red
    c_scale = max(float(np.abs(c_unit).max(initial=0.0)), 1e-300)

    x_unit = _bounded_simplex(c_unit / c_scale, g_unit)
    out = x_fix
    out[free] = np.clip(x_unit, 0.0, 1.0) * u_red
    return np.clip(out, 0.0, u)


def _bounded_simplex(costs, g):
    """Bounded-variable revised simplex for min c.x s.t. g x >= 1, 0 <= x <= 1.

    Starts from the feasible vertex x = upper bounds with a surplus basis and
    pivots by Bland's rule, so it terminates at an exact vertex optimum (the
    vertex itself is the optimality certificate).
    """
    m_rows, n_x = g.shape
    n = n_x + m_rows                       # x variables, then surplus slacks
    a_mat = np.concatenate([g, -np.eye(m_rows)], axis=1)
    c_full = np.concatenate([costs, np.zeros(m_rows)])
    upper = np.concatenate([np.ones(n_x), np.full(m_rows, np.inf)])

    basis = list(range(n_x, n))
    at_upper = np.zeros(n, dtype=bool)
    at_upper[:n_x] = True                  # x starts at its upper bounds
    tol_rc = 1e-10
    tol_piv = 1e-11

    def basic_values():
        rhs = np.ones(m_rows) - a_mat[:, at_upper] @ upper[at_upper]
        return np.linalg.solve(a_mat[:, basis], rhs)

    x_b = basic_values()
    if float(x_b.min()) < -1e-9:
        raise Infeasible("covering demand exceeds the box")

    in_basis = np.zeros(n, dtype=bool)
    in_basis[basis] = True

    for _ in range(20000):
        b_mat = a_mat[:, basis]
        y = np.linalg.solve(b_mat.T, c_full[basis])
        reduced = c_full - a_mat.T @ y
        entering = -1
        direction = 0.0
        for j in range(n):
            if in_basis[j]:
                continue
            if not at_upper[j] and reduced[j] < -tol_rc:
                entering, direction = j, 1.0
                break
            if at_upper[j] and reduced[j] > tol_rc:
                entering, direction = j, -1.0
                break
        if entering < 0:
            values = np.zeros(n)
            values[at_upper] = upper[at_upper]
            values[basis] = x_b
            return values[:n_x]

        w = np.linalg.solve(b_mat, a_mat[:, entering]) * direction
        # Basic variables move by -t * w as the entering variable moves by t
        # along `direction` off its bound.
        t_best = upper[entering] if np.isfinite(upper[entering]) else math.inf
        leave_pos = -1
        leave_to_upper = False
        for i in range(m_rows):
            if w[i] > tol_piv:
                t_i = max(x_b[i], 0.0) / w[i]
                if t_i < t_best - 1e-13 or (
                    abs(t_i - t_best) <= 1e-13 and (leave_pos < 0 or basis[i] < basis[leave_pos])
                ):
                    t_best, leave_pos, leave_to_upper = t_i, i, False
            elif w[i] < -tol_piv and np.isfinite(upper[basis[i]]):
                t_i = (upper[basis[i]] - x_b[i]) / (-w[i])
                if t_i < t_best - 1e-13 or (
                    abs(t_i - t_best) <= 1e-13 and (leave_pos < 0 or basis[i] < basis[leave_pos])
                ):
                    t_best, leave_pos, leave_to_upper = t_i, i, True
        if not np.isfinite(t_best):
            raise NumericalFailure("LP unbounded; box constraints should forbid this")

        if leave_pos < 0:
            # Bound flip: entering runs to its other bound without a pivot.
            at_upper[entering] = not at_upper[entering]
            x_b = basic_values()
            continue

        leaving = basis[leave_pos]
        basis[leave_pos] = entering
        in_basis[entering] = True
        in_basis[leaving] = False
        at_upper[entering] = False
        at_upper[leaving] = leave_to_upper
        x_b = basic_values()
    raise NumericalFailure("LP simplex iteration cap exceeded")
