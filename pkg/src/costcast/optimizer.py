"""Convex quadratic programming with a primal active-set method.

Problems are stated as

    minimize    0.5 x'Qx + q'x
    subject to  a_eq x == b_eq
                a_ub x <= b_ub
                lb <= x <= ub

with Q symmetric positive semidefinite.  Equalities (including variables
pinned by lb == ub) are eliminated through an orthonormal null-space basis
(QR of a_eq'), and the reduced problem is solved by a primal active-set
iteration that handles singular reduced Hessians via eigendecomposition, so
purely linear directions (battery charge/discharge, slack variables,
relaxed binaries) are supported without regularization.

A depth-first branch-and-bound wrapper handles complementary binary pairs
(v_i + v_j == 1, both in {0, 1}), which is all the dispatch layer needs for
battery charge/discharge exclusivity.  An integral-repair step closes the
tree at the root whenever the binaries only gate continuous variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ValidationError

_RANK_RTOL = 1e-11  # relative diagonal threshold for rank decisions in QR
_CURV_RTOL = 1e-10  # eigenvalues below this (relative) count as zero curvature
_ACT_TOL = 1e-8  # activity classification for warm starts
_FEAS_TOL = 1e-9  # feasibility slack granted during the iteration
_STEP_TOL = 1e-12
_MU_TOL = 1e-9
_RAY_UNBOUNDED = 1e13
_STALL_LIMIT = 30  # zero-progress iterations before switching to Bland's rule
_PRUNE_RTOL = 1e-8  # working sets closer to rank deficiency than this get pruned


def _as_matrix(m, name):
    if m is None:
        return None
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValidationError(f"{name} must be a 2-D array")
    return m


def _as_vector(v, name, n=None):
    if v is None:
        return None
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValidationError(f"{name} must be a 1-D array")
    if n is not None and v.size != n:
        raise ValidationError(f"{name} has length {v.size}, expected {n}")
    return v


@dataclass(frozen=True)
class QuadraticProgram:
    """Convex QP data.  Any of the constraint blocks may be None."""

    Q: np.ndarray
    q: np.ndarray
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        Q = _as_matrix(self.Q, "Q")
        q = _as_vector(self.q, "q")
        n = q.size
        if Q.shape != (n, n):
            raise ValidationError(f"Q has shape {Q.shape}, expected ({n}, {n})")
        sym_gap = float(np.abs(Q - Q.T).max()) if n else 0.0
        if sym_gap > 1e-8 * (1.0 + float(np.abs(Q).max())):
            raise ValidationError("Q must be symmetric")
        a_eq = _as_matrix(self.a_eq, "a_eq")
        b_eq = _as_vector(self.b_eq, "b_eq")
        if (a_eq is None) != (b_eq is None):
            raise ValidationError("a_eq and b_eq must be given together")
        if a_eq is not None:
            if a_eq.shape[1] != n:
                raise ValidationError(f"a_eq has {a_eq.shape[1]} columns, expected {n}")
            if b_eq.size != a_eq.shape[0]:
                raise ValidationError("b_eq length must match a_eq rows")
        a_ub = _as_matrix(self.a_ub, "a_ub")
        b_ub = _as_vector(self.b_ub, "b_ub")
        if (a_ub is None) != (b_ub is None):
            raise ValidationError("a_ub and b_ub must be given together")
        if a_ub is not None:
            if a_ub.shape[1] != n:
                raise ValidationError(f"a_ub has {a_ub.shape[1]} columns, expected {n}")
            if b_ub.size != a_ub.shape[0]:
                raise ValidationError("b_ub length must match a_ub rows")
        lb = _as_vector(self.lb, "lb", n)
        ub = _as_vector(self.ub, "ub", n)
        if lb is not None and ub is not None and np.any(lb > ub):
            bad = int(np.argmax(lb > ub))
            raise ValidationError(f"lb[{bad}] > ub[{bad}]")
        for nm, val in (
            ("Q", Q), ("q", q), ("a_eq", a_eq), ("b_eq", b_eq),
            ("a_ub", a_ub), ("b_ub", b_ub),
        ):
            if val is not None and not np.all(np.isfinite(val)):
                raise ValidationError(f"{nm} must be finite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "a_eq", a_eq)
        object.__setattr__(self, "b_eq", b_eq)
        object.__setattr__(self, "a_ub", a_ub)
        object.__setattr__(self, "b_ub", b_ub)
        object.__setattr__(self, "lb", lb)
        object.__setattr__(self, "ub", ub)

    @property
    def n(self):
        return self.q.size

    def objective(self, x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.Q @ x + self.q @ x)


@dataclass(frozen=True)
class MixedBinaryQp:
    """QP plus complementary binary pairs.

    Each ``(i, j)`` in ``binary_pairs`` requires ``x[i] + x[j] == 1`` with
    both entries in {0, 1}.  All pair indices must be distinct.
    """

    base: QuadraticProgram
    binary_pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pairs = tuple((int(i), int(j)) for i, j in self.binary_pairs)
        object.__setattr__(self, "binary_pairs", pairs)
        n = self.base.n
        seen = set()
        for i, j in pairs:
            if not (0 <= i < n and 0 <= j < n):
                raise ValidationError(f"binary pair ({i}, {j}) index out of range")
            if i == j:
                raise ValidationError(f"binary pair ({i}, {j}) must use two variables")
            if i in seen or j in seen:
                raise ValidationError(f"binary pair ({i}, {j}) reuses a variable")
            seen.update((i, j))


@dataclass
class Solution:
    """Result of a solve.  ``status`` is one of 'optimal', 'infeasible',
    'unbounded', 'iteration-limit'; ``x`` always carries the best iterate."""

    x: np.ndarray
    objective: float
    status: str
    kkt_residual: float
    info: dict = field(default_factory=dict, repr=False)


class SolverCache:
    """Holds factorizations reusable across solves that share structure.

    Valid when successive problems keep the same Q, a_eq, a_ub matrices and
    the same pattern of finite/pinned bounds, changing only right-hand
    sides (b_eq, b_ub, bound values).  The dispatch layer hits this case on
    every scenario.
    """

    def __init__(self):
        self._entries = {}

    def get(self, key):
        return self._entries.get(key)

    def put(self, key, value):
        self._entries[key] = value

    def clear(self):
        self._entries.clear()


def _bound_pattern(qp):
    """(fixed, lo_idx, hi_idx): variables pinned by lb == ub, and the
    variables with finite one-sided bounds (pinned ones excluded)."""
    n = qp.n
    if qp.lb is not None and qp.ub is not None:
        fixed = np.flatnonzero(qp.lb == qp.ub)
    else:
        fixed = np.zeros(0, dtype=int)
    fixed_mask = np.zeros(n, dtype=bool)
    fixed_mask[fixed] = True
    lo = (np.flatnonzero(np.isfinite(qp.lb) & ~fixed_mask)
          if qp.lb is not None else np.zeros(0, dtype=int))
    hi = (np.flatnonzero(np.isfinite(qp.ub) & ~fixed_mask)
          if qp.ub is not None else np.zeros(0, dtype=int))
    return fixed, lo, hi


def _build_structure(qp):
    """Canonical form data that depends only on matrices and bound patterns.

    Inequalities become row-normalized G y <= h; equalities (a_eq plus the
    pinned variables) are QR-factorized for elimination.  Everything here
    can live in a SolverCache and be reused when only right-hand sides
    change.
    """
    n = qp.n
    fixed, lo_idx, hi_idx = _bound_pattern(qp)

    rows = []
    kinds = []  # (tag, index) mapping canonical rows back to user constraints
    if qp.a_ub is not None:
        for r in range(qp.a_ub.shape[0]):
            rows.append(qp.a_ub[r])
            kinds.append(("ub_row", r))
    for i in lo_idx:
        e = np.zeros(n)
        e[i] = -1.0
        rows.append(e)
        kinds.append(("lb", int(i)))
    for i in hi_idx:
        e = np.zeros(n)
        e[i] = 1.0
        rows.append(e)
        kinds.append(("ub", int(i)))
    if rows:
        G = np.vstack(rows)
        row_scale = np.abs(G).max(axis=1)
        row_scale[row_scale == 0.0] = 1.0
        G = G / row_scale[:, None]
    else:
        G = np.zeros((0, n))
        row_scale = np.zeros(0)

    eq_blocks = []
    if qp.a_eq is not None and qp.a_eq.shape[0] > 0:
        eq_blocks.append(qp.a_eq)
    if fixed.size:
        pin = np.zeros((fixed.size, n))
        pin[np.arange(fixed.size), fixed] = 1.0
        eq_blocks.append(pin)
    if eq_blocks:
        A = eq_blocks[0] if len(eq_blocks) == 1 else np.vstack(eq_blocks)
        At = A.T  # (n, m)
        m = At.shape[1]
        Qf, Rf = scipy.linalg.qr(At, mode="full")
        diag = np.abs(np.diag(Rf[: min(n, m), : min(n, m)]))
        dmax = diag.max() if diag.size else 0.0
        if m > n or (diag.size and diag.min() <= _RANK_RTOL * max(1.0, dmax)):
            # possible rank deficiency: redo with column pivoting
            Qf, Rf, piv = scipy.linalg.qr(At, mode="full", pivoting=True)
            diag = np.abs(np.diag(Rf[: min(n, m), : min(n, m)]))
            dmax = diag.max() if diag.size else 0.0
            rank = int(np.sum(diag > _RANK_RTOL * max(1.0, dmax)))
        else:
            piv = np.arange(m)
            rank = m
        eqfac = (Qf, Rf, piv, rank, m)
        Z = Qf[:, rank:]
        a_all = A
    else:
        eqfac = None
        Z = None  # identity
        a_all = None

    if Z is None:
        H = qp.Q
        G_red = G
    else:
        H = Z.T @ qp.Q @ Z
        G_red = G @ Z
    return {"G": G, "row_scale": row_scale, "row_kind": kinds, "eqfac": eqfac,
            "Z": Z, "H": H, "G_red": G_red, "fixed": fixed, "a_all": a_all,
            "lo_idx": lo_idx, "hi_idx": hi_idx}


def _eq_rhs(qp, structure):
    """Right-hand side of the combined equality block (a_eq + pins)."""
    parts = []
    if qp.b_eq is not None and qp.b_eq.size:
        parts.append(qp.b_eq)
    fixed = structure["fixed"]
    if fixed.size:
        parts.append(qp.lb[fixed])
    if not parts:
        return np.zeros(0)
    return parts[0] if len(parts) == 1 else np.concatenate(parts)


def _rhs_vector(qp, structure):
    """Inequality right-hand side matching the canonical row order."""
    parts = []
    if qp.a_ub is not None:
        parts.append(qp.b_ub)
    if structure["lo_idx"].size:
        parts.append(-qp.lb[structure["lo_idx"]])
    if structure["hi_idx"].size:
        parts.append(qp.ub[structure["hi_idx"]])
    if not parts:
        return np.zeros(0)
    h = np.concatenate(parts)
    return h / structure["row_scale"]


def _particular_solution(qp, structure):
    """Min-norm x on the equality manifold, plus the unremovable residual."""
    eqfac = structure["eqfac"]
    if eqfac is None:
        return np.zeros(qp.n), 0.0
    Qf, Rf, piv, rank, m = eqfac
    b = _eq_rhs(qp, structure)
    b_p = b[piv]
    if rank == 0:
        res = float(np.abs(b).max()) if b.size else 0.0
        return np.zeros(qp.n), res
    z_r = scipy.linalg.solve_triangular(Rf[:rank, :rank].T, b_p[:rank], lower=True)
    if rank < m:
        res = float(np.abs(Rf[:rank, rank:m].T @ z_r - b_p[rank:]).max())
    else:
        res = 0.0
    x_p = Qf[:, :rank] @ z_r
    return x_p, res


def _blocking_step(G, h, y, d, cap, bland):
    """Largest alpha <= cap keeping y + alpha*d feasible, and the blocking
    row; under Bland's rule ties resolve to the lowest row index.

    Rows whose component along the (row-normalized) direction is tiny are
    ignored: stepping into them would add a nearly dependent row to the
    working set.
    """
    if G.shape[0] == 0:
        return cap, -1
    Gd = G @ d
    mask = Gd > 1e-9 * float(np.abs(d).max())
    if not np.any(mask):
        return cap, -1
    idx = np.flatnonzero(mask)
    slack = np.maximum(h[idx] - G[idx] @ y, 0.0)
    ratios = slack / Gd[idx]
    alpha = float(ratios.min())
    if alpha >= cap:
        return cap, -1
    if bland:
        tied = idx[ratios <= alpha + 1e-12]
        return alpha, int(tied.min())
    k = int(np.argmin(ratios))
    return alpha, int(idx[k])


def _independent_subset(G, rows, rtol=_PRUNE_RTOL):
    """Subset of the given rows that is comfortably full rank, chosen by
    pivoted QR.  Nearly dependent rows are left out: in a working set they
    produce meaningless multipliers."""
    if not rows:
        return []
    M = G[rows].T  # (n, k)
    _, R, piv = scipy.linalg.qr(M, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0:
        return []
    rank = int(np.sum(diag > rtol * max(1.0, diag.max())))
    return [rows[i] for i in sorted(piv[:rank])]


def _active_set_core(H, g, G, h, y0, w0, max_iter):
    """Primal active-set iteration from a feasible start.

    Returns (y, working_set, status, iterations).  ``status`` is 'optimal',
    'unbounded' or 'iteration-limit'.  After a stretch of degenerate
    (zero-length) steps the pivoting rules switch to lowest-index selection
    to break cycles.
    """
    n = y0.size
    y = y0.copy()
    W = list(w0)
    g_scale = 1.0 + float(np.abs(g).max()) if g.size else 1.0
    stall = 0

    for it in range(1, max_iter + 1):
        bland = stall >= _STALL_LIMIT
        grad = H @ y + g
        if W:
            GW_T = G[W].T  # (n, w)
            Qw, Rw = scipy.linalg.qr(GW_T, mode="full")
            w = len(W)
            diag = np.abs(np.diag(Rw[:w, :w]))
            if diag.size and diag.min() <= _PRUNE_RTOL * max(1.0, diag.max()):
                # Nearly dependent working set: multipliers computed from it
                # would be garbage.  Prune to a well-conditioned subset.
                W = _independent_subset(G, W)
                if W:
                    GW_T = G[W].T
                    Qw, Rw = scipy.linalg.qr(GW_T, mode="full")
                    w = len(W)
            Nb = Qw[:, w:] if W else None
        else:
            Qw = Rw = None
            Nb = None  # identity

        # Step toward the minimum on the current working-set subspace.
        gh = grad if Nb is None else Nb.T @ grad
        stationary = False
        if n - len(W) == 0:
            stationary = True
        else:
            Hh = H if Nb is None else Nb.T @ H @ Nb
            lam, V = scipy.linalg.eigh(Hh)
            lam_cut = _CURV_RTOL * max(1.0, float(lam[-1]) if lam.size else 1.0)
            pos = lam > lam_cut
            g_rot = V.T @ gh
            g_null_rot = np.where(pos, 0.0, g_rot)
            if float(np.abs(g_null_rot).max(initial=0.0)) > 1e-11 * g_scale:
                # Descent ray with (numerically) zero curvature: walk until a
                # constraint blocks, or declare the problem unbounded.
                d_red = -(V @ g_null_rot)
                d = d_red if Nb is None else Nb @ d_red
                d /= float(np.abs(d).max())
                alpha, j = _blocking_step(G, h, y, d, _RAY_UNBOUNDED, bland)
                if j < 0:
                    return y, W, "unbounded", it
                y = y + alpha * d
                W.append(j)
                stall = stall + 1 if alpha <= _STEP_TOL else 0
                continue
            u_rot = np.where(pos, -g_rot / np.where(pos, lam, 1.0), 0.0)
            p_red = V @ u_rot
            p = p_red if Nb is None else Nb @ p_red
            if float(np.abs(p).max()) <= _STEP_TOL * (1.0 + float(np.abs(y).max())):
                stationary = True
            else:
                alpha, j = _blocking_step(G, h, y, p, 1.0, bland)
                y = y + alpha * p
                stall = stall + 1 if alpha <= _STEP_TOL else 0
                if j >= 0:
                    W.append(j)
                    continue
                # Reached the subspace minimum; re-enter to check multipliers.
                continue

        if stationary:
            if not W:
                return y, W, "optimal", it
            w = len(W)
            rhs = Qw[:, :w].T @ (-grad)
            mu = scipy.linalg.solve_triangular(Rw[:w, :w], rhs, lower=False)
            neg = np.flatnonzero(mu < -_MU_TOL * g_scale)
            if neg.size == 0:
                return y, W, "optimal", it
            if bland:
                drop = int(min(range(len(W)), key=lambda t: W[t] if mu[t] < -_MU_TOL * g_scale else np.inf))
            else:
                drop = int(np.argmin(mu))
            del W[drop]
            stall += 1

    return y, W, "iteration-limit", max_iter


def _phase1(G, h, y0, max_iter):
    """Find a feasible point for G y <= h by minimizing the worst violation."""
    n = y0.size
    viol = G @ y0 - h if G.shape[0] else np.zeros(0)
    t0 = float(viol.max(initial=0.0)) + 1.0
    # Augmented problem in (y, t):  min t  s.t.  G y - t <= h,  -t <= 1.
    Ga = np.hstack([G, -np.ones((G.shape[0], 1))])
    bound = np.zeros((1, n + 1))
    bound[0, -1] = -1.0
    Ga = np.vstack([Ga, bound])
    ha = np.concatenate([h, [1.0]])
    Ha = np.zeros((n + 1, n + 1))
    ga = np.zeros(n + 1)
    ga[-1] = 1.0
    ya0 = np.concatenate([y0, [t0]])
    ya, Wa, status, its = _active_set_core(Ha, ga, Ga, ha, ya0, [], max_iter)
    return ya[:n], float(ya[-1]), status, its


def _structure_key(cache_key, qp):
    """Cache key including the bound pattern, which branch-and-bound varies."""
    fixed, lo, hi = _bound_pattern(qp)
    return (cache_key, fixed.tobytes(), lo.tobytes(), hi.tobytes())


def solve_qp(qp, x0=None, tol=1e-8, max_iter=None, cache=None, cache_key=None):
    """Solve a convex QP; returns a :class:`Solution`.

    ``x0`` is an optional warm-start point: it is projected onto the
    equality manifold, and constraints active there seed the working set.
    ``cache``/``cache_key`` reuse matrix factorizations across solves that
    differ only in right-hand sides (see :class:`SolverCache`).
    """
    n = qp.n
    if max_iter is None:
        max_iter = 200 + 30 * n

    structure = None
    skey = None
    if cache is not None and cache_key is not None:
        skey = _structure_key(cache_key, qp)
        structure = cache.get(skey)
    if structure is None:
        structure = _build_structure(qp)
        if skey is not None:
            cache.put(skey, structure)

    G = structure["G"]
    Z = structure["Z"]
    H = structure["H"]
    G_red = structure["G_red"]
    h = _rhs_vector(qp, structure)
    x_p, eq_res = _particular_solution(qp, structure)
    b_all = _eq_rhs(qp, structure)
    b_scale = 1.0 + (float(np.abs(b_all).max()) if b_all.size else 0.0)
    info = {"iterations": 0, "phase1_iterations": 0}
    if eq_res > 1e-7 * b_scale:
        info["certificate"] = eq_res
        return Solution(x_p, qp.objective(x_p), "infeasible", np.inf, info)

    g0 = (qp.Q @ x_p + qp.q) if Z is None else Z.T @ (qp.Q @ x_p + qp.q)
    h_red = h - G @ x_p if G.shape[0] else h
    n_red = n if Z is None else Z.shape[1]

    # Starting point in reduced coordinates.
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (n,):
            raise ValidationError(f"x0 has shape {x0.shape}, expected ({n},)")
        y = x0 - x_p if Z is None else Z.T @ (x0 - x_p)
    else:
        y = np.zeros(n_red)

    h_scale = 1.0 + (float(np.abs(h).max()) if h.size else 0.0)
    viol = float((G_red @ y - h_red).max(initial=0.0)) if G.shape[0] else 0.0
    if viol > _FEAS_TOL * h_scale:
        y, t_star, p1_status, p1_iters = _phase1(G_red, h_red, y, max_iter)
        info["phase1_iterations"] = p1_iters
        if p1_status == "iteration-limit":
            x = x_p + y if Z is None else x_p + Z @ y
            return Solution(x, qp.objective(x), "iteration-limit", np.inf, info)
        if t_star > 1e-7 * h_scale:
            x = x_p + y if Z is None else x_p + Z @ y
            info["certificate"] = t_star
            slack = G_red @ y - h_red
            info["certificate_rows"] = [
                structure["row_kind"][r]
                for r in np.flatnonzero(slack >= t_star - 1e-7 * h_scale)
            ]
            return Solution(x, qp.objective(x), "infeasible", np.inf, info)

    # Seed the working set with constraints active at the start point.
    if G.shape[0]:
        slack = h_red - G_red @ y
        active = np.flatnonzero(slack <= _ACT_TOL * h_scale).tolist()
        w0 = _independent_subset(G_red, active)
    else:
        w0 = []

    y, W, status, iters = _active_set_core(H, g0, G_red, h_red, y, w0, max_iter)
    info["iterations"] = iters
    x = x_p + y if Z is None else x_p + Z @ y
    info["working_set"] = [structure["row_kind"][r] for r in W]

    # Multipliers and KKT residual in the original variable space.
    mu_canon = np.zeros(G.shape[0])
    if W and status == "optimal":
        GW_T = G_red[W].T
        grad_red = H @ y + g0
        mu, *_ = np.linalg.lstsq(GW_T, -grad_red, rcond=None)
        mu_canon[W] = np.maximum(mu, 0.0)
    mu_orig = mu_canon / structure["row_scale"] if G.shape[0] else mu_canon

    grad = qp.Q @ x + qp.q
    resid = grad.copy()
    if G.shape[0]:
        resid += (G * structure["row_scale"][:, None]).T @ mu_orig
    if structure["eqfac"] is not None:
        Qf, Rf, piv, rank, m = structure["eqfac"]
        rhs = Qf[:, :rank].T @ (-resid)
        u = np.zeros(m)
        if rank:
            u[:rank] = scipy.linalg.solve_triangular(Rf[:rank, :rank], rhs, lower=False)
        lam = np.zeros(m)
        lam[piv] = u
        resid += structure["a_all"].T @ lam

    g_scale = 1.0 + float(np.abs(grad).max(initial=0.0))
    stat = float(np.abs(resid).max(initial=0.0)) / g_scale
    eq_viol = 0.0
    if structure["a_all"] is not None:
        eq_viol = float(np.abs(structure["a_all"] @ x - b_all).max()) / b_scale
    in_viol = comp = 0.0
    if G.shape[0]:
        s = G @ x - h  # canonical scaled rows
        in_viol = float(np.maximum(s, 0.0).max()) / h_scale
        comp = float(np.abs(mu_canon * s).max()) / g_scale
    kkt = max(stat, eq_viol, in_viol, comp)
    if status == "optimal" and kkt > tol:
        status = "iteration-limit"

    return Solution(x, qp.objective(x), status, kkt, info)


# ---------------------------------------------------------------------------
# Branch and bound for complementary binary pairs


def _augmented_base(prob):
    """Base QP with the pairing equalities v_i + v_j == 1 appended and the
    leading binary of each pair boxed into [0, 1].

    Only the first element of a pair gets explicit bounds: with the
    equality in place, bounds on the partner would reduce to the very same
    rows and make every working set that touches them degenerate.
    """
    qp = prob.base
    n = qp.n
    pairs = prob.binary_pairs
    extra = np.zeros((len(pairs), n))
    for r, (i, j) in enumerate(pairs):
        extra[r, i] = 1.0
        extra[r, j] = 1.0
    a_eq = extra if qp.a_eq is None else np.vstack([qp.a_eq, extra])
    b_eq = np.ones(len(pairs))
    if qp.b_eq is not None:
        b_eq = np.concatenate([qp.b_eq, b_eq])
    lb = np.full(n, -np.inf) if qp.lb is None else qp.lb.copy()
    ub = np.full(n, np.inf) if qp.ub is None else qp.ub.copy()
    for i, j in pairs:
        lo, hi = max(lb[i], 0.0), min(ub[i], 1.0)
        if np.isfinite(ub[j]):
            lo = max(lo, 1.0 - ub[j])
        if np.isfinite(lb[j]):
            hi = min(hi, 1.0 - lb[j])
        if lo > hi:
            raise ValidationError(f"bounds exclude both values of binary pair ({i}, {j})")
        lb[i], ub[i] = lo, hi
        lb[j] = -np.inf
        ub[j] = np.inf
    return a_eq, b_eq, lb, ub


def _pair_rounding_order(qp, x, i, j):
    """Both 0/1 assignments for a pair, most promising first.

    Preference goes to the assignment that least violates the inequality
    rows touching the pair when the continuous variables stay put, so
    binaries that merely gate other variables round to the feasible side.
    Ties resolve by the relaxed magnitudes.
    """
    options = ((1.0, 0.0), (0.0, 1.0))
    if qp.a_ub is None:
        return options if x[i] >= x[j] else options[::-1]
    cols = qp.a_ub[:, [i, j]]
    touch = np.flatnonzero(np.any(cols != 0.0, axis=1))
    if touch.size == 0:
        return options if x[i] >= x[j] else options[::-1]
    base_lhs = qp.a_ub[touch] @ x
    viol = []
    for vi, vj in options:
        lhs = base_lhs + qp.a_ub[touch, i] * (vi - x[i]) + qp.a_ub[touch, j] * (vj - x[j])
        viol.append(float(np.maximum(lhs - qp.b_ub[touch], 0.0).max(initial=0.0)))
    if abs(viol[0] - viol[1]) <= 1e-12:
        return options if x[i] >= x[j] else options[::-1]
    return options if viol[0] < viol[1] else options[::-1]


def _try_integral_repair(qp, pairs, rel, feas_tol):
    """Round every pair to 0/1 without moving the continuous variables.

    Succeeds when the rounded point stays feasible and keeps the relaxation
    objective (within tolerance), which certifies it as optimal.  Returns
    the repaired x or None.
    """
    x = rel.x.copy()
    for i, j in pairs:
        vi, vj = _pair_rounding_order(qp, x, i, j)[0]
        x[i], x[j] = vi, vj
    if qp.a_ub is not None:
        scale = 1.0 + float(np.abs(qp.b_ub).max(initial=0.0))
        if float((qp.a_ub @ x - qp.b_ub).max(initial=0.0)) > feas_tol * scale:
            return None
    if qp.a_eq is not None:
        scale = 1.0 + float(np.abs(qp.b_eq).max(initial=0.0))
        if float(np.abs(qp.a_eq @ x - qp.b_eq).max(initial=0.0)) > 10.0 * feas_tol * scale:
            return None
    obj = qp.objective(x)
    if obj > rel.objective + 1e-9 * (1.0 + abs(rel.objective)):
        return None
    return x


def solve_mixed_binary(prob, tol=1e-8, max_pairs=96, max_nodes=20000,
                       x0=None, cache=None, cache_key=None, int_tol=1e-6):
    """Solve a QP with complementary binary pairs by branch and bound.

    Nodes are explored depth-first, branching on the pair whose relaxed
    value is most fractional; the child agreeing with the relaxation is
    explored first.  At each node an integral repair and a rounding dive
    supply incumbents early; for binaries that only gate continuous
    variables the repair certifies the root relaxation, so no branching
    happens at all.
    """
    if len(prob.binary_pairs) > max_pairs:
        raise ValidationError(
            f"{len(prob.binary_pairs)} binary pairs exceeds the limit of {max_pairs}"
        )
    qp = prob.base
    a_eq, b_eq, lb0, ub0 = _augmented_base(prob)
    pairs = prob.binary_pairs

    def node_qp(lb, ub):
        return QuadraticProgram(qp.Q, qp.q, a_eq, b_eq, qp.a_ub, qp.b_ub, lb, ub)

    lead_idx = [i for i, _ in pairs]

    def integral(x):
        # the pairing equality makes the partner integral with the leader
        if not pairs:
            return True
        vals = x[lead_idx]
        return float(np.abs(vals - np.round(vals)).max()) <= int_tol

    def fix_values(x, lb, ub):
        """Bounds pinning each pair's leader to its preferred rounding at x."""
        lbf, ubf = lb.copy(), ub.copy()
        for i, j in pairs:
            vi, _ = _pair_rounding_order(qp, x, i, j)[0]
            lbf[i] = ubf[i] = vi
        return lbf, ubf

    nodes = 0
    qp_solves = 0
    incumbent = None

    def solve_node(lb, ub, start):
        nonlocal qp_solves
        qp_solves += 1
        return solve_qp(node_qp(lb, ub), x0=start, tol=tol,
                        cache=cache, cache_key=cache_key)

    def polish(x, lb, ub):
        """Exact solve with every pair's leader pinned at its value in x."""
        lbf, ubf = lb.copy(), ub.copy()
        for k in lead_idx:
            lbf[k] = ubf[k] = round(x[k])
        return solve_node(lbf, ubf, x)

    stack = [(lb0, ub0, x0)]
    status_out = "optimal"
    while stack:
        lb, ub, start = stack.pop()
        if nodes >= max_nodes:
            status_out = "iteration-limit"
            break
        nodes += 1
        rel = solve_node(lb, ub, start)
        if rel.status == "infeasible":
            continue
        if rel.status in ("unbounded", "iteration-limit"):
            status_out = rel.status
            if rel.status == "unbounded":
                break
            continue
        if incumbent is not None and rel.objective >= incumbent.objective - 1e-9:
            continue
        if integral(rel.x):
            cand = polish(rel.x, lb, ub)
            if cand.status != "optimal":
                cand = rel
            if incumbent is None or cand.objective < incumbent.objective:
                incumbent = cand
            continue
        repaired = _try_integral_repair(node_qp(lb, ub), pairs, rel, _FEAS_TOL)
        if repaired is not None:
            cand = polish(repaired, lb, ub)
            if (cand.status == "optimal"
                    and cand.objective <= rel.objective + 1e-9 * (1.0 + abs(rel.objective))):
                if incumbent is None or cand.objective < incumbent.objective:
                    incumbent = cand
                continue  # repair met the node bound: subtree closed
        # Rounding dive for an early incumbent.
        lbf, ubf = fix_values(rel.x, lb, ub)
        dive = solve_node(lbf, ubf, rel.x)
        if dive.status == "optimal" and (incumbent is None or dive.objective < incumbent.objective):
            incumbent = dive
            if dive.objective <= rel.objective + 1e-9:
                continue  # relaxation bound met: this subtree is closed
        # Branch on the most fractional pair, pinning the leader only.
        frac = [abs(rel.x[i] - round(rel.x[i])) for i, _ in pairs]
        k = int(np.argmax(frac))
        i, _ = pairs[k]
        pref = 1.0 if rel.x[i] >= 0.5 else 0.0
        for v in (1.0 - pref, pref):  # preferred branch on top of the stack
            lbc, ubc = lb.copy(), ub.copy()
            lbc[i] = ubc[i] = v
            stack.append((lbc, ubc, rel.x))

    if incumbent is None:
        sol = Solution(np.zeros(qp.n), np.inf,
                       "infeasible" if status_out == "optimal" else status_out,
                       np.inf, {})
    else:
        sol = incumbent
        if status_out != "optimal":
            sol.status = status_out
    sol.info = dict(sol.info)
    sol.info["nodes"] = nodes
    sol.info["qp_solves"] = qp_solves
    if sol.status == "optimal" and pairs:
        for i, j in pairs:
            sol.x[i] = abs(round(sol.x[i]))
            sol.x[j] = 1.0 - sol.x[i]
    return sol
