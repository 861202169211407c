"""Dual solver for the regularized information projection.

The fit minimizes, over multipliers ``lambda >= 0``,

    ``(1/N) sum_i D_f^conj(-G_i^T lambda, p_i)
      + (zeta/2) [ (1/N) sum_i ||G_i^T lambda||^2 + ||lambda||^2 ]``

by consensus ADMM: per-sample inner updates ``v_i`` (divergence module), a
shared nonnegative quadratic program in ``lambda``, and scaled dual variables
``w_i``.  The quadratic term's matrix ``Q = (zeta/2) I + (rho/2N) sum_i
G_i G_i^T`` is precomputed once.

Samples are processed in fixed-size chunks; with ``worker_count > 1`` chunks
run on a thread pool but partial reductions are always combined in chunk
order, so results do not depend on the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .constraints import ConstraintSet
from .divergence import (
    Divergence,
    ce_conj,
    f_divergence,
    kl_conj,
    v_update_ce_batch,
    v_update_generic,
    v_update_kl_batch,
)
from .exceptions import ConvergenceError, InfeasibilityError, NumericBlowupError

CHUNK_SIZE = 16384


def default_zeta(n: int) -> float:
    """Regularization weight balancing estimation and approximation error."""
    return 1.0 / math.sqrt(n)


def default_max_iters(n: int) -> int:
    return max(500, math.ceil(10.0 * math.log(n)))


@dataclass
class SolverConfig:
    rho: float = 2.0
    zeta: float | None = None  # None: 1/sqrt(N)
    max_iters: int | None = None  # None: max(500, ceil(10 ln N))
    residual_tol: float = 1e-6
    worker_count: int = 1
    seed: int = 0
    chunk_size: int = CHUNK_SIZE

    def __post_init__(self):
        if self.rho <= 0.0:
            raise ValueError("rho must be positive")
        if self.zeta is not None and self.zeta <= 0.0:
            raise ValueError("zeta must be positive when set")
        if self.worker_count < 1 or self.chunk_size < 1:
            raise ValueError("worker_count and chunk_size must be >= 1")


@dataclass
class DualSolution:
    lam: np.ndarray
    iterations: int
    primal_residuals: list = field(default_factory=list)
    lambda_steps: list = field(default_factory=list)


def precompute_q(cs: ConstraintSet, rho: float, zeta: float) -> np.ndarray:
    """``Q = (zeta/2) I_K + (rho/2N) sum_i G_i G_i^T`` (symmetric PD)."""
    g = cs.g
    n, k, _ = g.shape
    q = np.einsum("ikc,ilc->kl", g, g) * (rho / (2.0 * n))
    q[np.diag_indices(k)] += zeta / 2.0
    return q


def _kkt_residual(q_mat: np.ndarray, q_vec: np.ndarray, lam: np.ndarray) -> float:
    grad = 2.0 * (q_mat @ lam) + q_vec
    kkt = np.where(lam > 0.0, np.abs(grad), np.maximum(0.0, -grad))
    return float(kkt.max()) if lam.size else 0.0


def _active_set_polish(
    q_mat: np.ndarray, q_vec: np.ndarray, lam: np.ndarray, kkt_tol: float
) -> np.ndarray:
    """Exact QP finisher for the cases where coordinate descent crawls.

    Standard primal active-set iteration: solve the equality-restricted
    problem on the free coordinates, take the largest feasible step toward
    that solution, and exchange blocking/released indices until the KKT
    conditions hold.  Finite for positive definite Q.
    """
    k = q_vec.size
    free = lam > 0.0
    for _ in range(16 * (k + 1)):
        if free.any():
            idx = np.flatnonzero(free)
            target = np.linalg.solve(2.0 * q_mat[np.ix_(idx, idx)], -q_vec[idx])
            direction = target - lam[idx]
            blocking = (target < 0.0) & (direction < 0.0)
            if blocking.any():
                steps = -lam[idx][blocking] / direction[blocking]
                t = float(steps.min())
                lam[idx] = np.maximum(0.0, lam[idx] + t * direction)
                hit = idx[blocking][steps == t]
                lam[hit] = 0.0
                free[hit] = False
                continue
            lam[idx] = np.maximum(target, 0.0)
        grad = 2.0 * (q_mat @ lam) + q_vec
        grad_clamped = np.where(free, 0.0, grad)
        worst = int(np.argmin(grad_clamped))
        if grad_clamped[worst] >= -kkt_tol:
            return lam
        free[worst] = True
    raise ConvergenceError(
        "QP active-set refinement failed to settle", residual=_kkt_residual(q_mat, q_vec, lam)
    )


def lambda_qp_solve(
    q_mat: np.ndarray,
    q_vec: np.ndarray,
    warm: np.ndarray | None = None,
    step_tol: float = 1e-10,
    kkt_tol: float = 1e-9,
    max_sweeps: int = 200,
) -> np.ndarray:
    """``argmin_{l >= 0} l^T Q l + q^T l`` by cyclic coordinate descent.

    Each coordinate has the closed-form update ``l_k <- max(0, l_k - r_k /
    (2 Q_kk))`` with ``r = 2 Q l + q`` the gradient, maintained incrementally.
    Sweeps stop when the largest coordinate change is at most ``step_tol``.
    Ill-conditioned instances can zigzag past the sweep budget, so whenever
    the KKT residual is still above tolerance the active-set finisher takes
    over from the current iterate.
    """
    k = q_vec.size
    lam = np.zeros(k) if warm is None else np.asarray(warm, dtype=float).copy()
    diag = np.diag(q_mat)
    if np.any(diag <= 0.0):
        raise ValueError("Q must have positive diagonal")
    grad = 2.0 * (q_mat @ lam) + q_vec
    cols = 2.0 * q_mat
    for _ in range(max_sweeps):
        biggest = 0.0
        for j in range(k):
            new = lam[j] - grad[j] / (2.0 * diag[j])
            if new < 0.0:
                new = 0.0
            step = new - lam[j]
            if step != 0.0:
                grad += cols[:, j] * step
                lam[j] = new
                if abs(step) > biggest:
                    biggest = abs(step)
        if biggest <= step_tol:
            break
    if _kkt_residual(q_mat, q_vec, lam) > kkt_tol:
        lam = _active_set_polish(q_mat, q_vec, lam, kkt_tol)
    worst = _kkt_residual(q_mat, q_vec, lam)
    if worst > kkt_tol:
        raise ConvergenceError(f"QP KKT residual {worst:.3e} above tolerance", residual=worst)
    return lam


def _chunks(n: int, size: int):
    return [slice(lo, min(lo + size, n)) for lo in range(0, n, size)]


class _CompactRows:
    """Class-blocked view of constraint tensors whose rows are single-column.

    SP and EO rows scale one basis vector e_{c'}, so ``G_i^T lam`` and the
    per-row reductions collapse to one matrix-vector product per class.  Rows
    are permuted so same-column rows are adjacent and each block is stored
    Fortran-ordered per chunk, keeping the BLAS calls on contiguous views.
    """

    def __init__(self, g: np.ndarray, spans, cols: np.ndarray):
        n, k, num_c = g.shape
        self.num_c = num_c
        self.perm = np.argsort(cols, kind="stable")
        sorted_cols = cols[self.perm]
        # bounds[c] .. bounds[c+1] indexes the rows writing to class c
        self.bounds = np.searchsorted(sorted_cols, np.arange(num_c + 1))
        val = np.take_along_axis(g, cols[None, :, None], axis=2)[:, :, 0]
        self.blocks = [np.asfortranarray(val[span][:, self.perm]) for span in spans]

    @staticmethod
    def detect(g: np.ndarray):
        nonzero = np.any(g != 0.0, axis=0)
        if np.any(nonzero.sum(axis=1) > 1):
            return None
        return np.argmax(nonzero, axis=1)

    def gt_lambda(self, j: int, lam: np.ndarray, out: np.ndarray) -> None:
        lam_p = lam[self.perm]
        block = self.blocks[j]
        for c in range(self.num_c):
            lo, hi = self.bounds[c], self.bounds[c + 1]
            out[:, c] = block[:, lo:hi] @ lam_p[lo:hi]

    def reduce_rows(self, j: int, x: np.ndarray) -> np.ndarray:
        """Per-row sum over the chunk's samples of ``(G_i x_i)_k``."""
        block = self.blocks[j]
        out_p = np.empty(self.perm.size)
        for c in range(self.num_c):
            lo, hi = self.bounds[c], self.bounds[c + 1]
            out_p[lo:hi] = x[:, c] @ block[:, lo:hi]
        out = np.empty_like(out_p)
        out[self.perm] = out_p
        return out

    def gram(self, rho: float, zeta: float, n: int) -> np.ndarray:
        k = self.perm.size
        q_p = np.zeros((k, k))
        for c in range(self.num_c):
            lo, hi = self.bounds[c], self.bounds[c + 1]
            for block in self.blocks:
                sub = block[:, lo:hi]
                q_p[lo:hi, lo:hi] += sub.T @ sub
        q = np.zeros((k, k))
        q[np.ix_(self.perm, self.perm)] = q_p
        q *= rho / (2.0 * n)
        q[np.diag_indices(k)] += zeta / 2.0
        return q


def admm_fit(
    scores: np.ndarray,
    cs: ConstraintSet,
    div: Divergence,
    cfg: SolverConfig | None = None,
) -> DualSolution:
    """Fit the dual multipliers for clipped base scores and a constraint set."""
    cfg = cfg or SolverConfig()
    p = np.asarray(scores, dtype=float)
    g = cs.g
    n, k, num_c = g.shape
    if p.shape != (n, num_c):
        raise ValueError("scores shape disagrees with constraint set")
    zeta = cfg.zeta if cfg.zeta is not None else default_zeta(n)
    max_iters = cfg.max_iters if cfg.max_iters is not None else default_max_iters(n)
    rho = cfg.rho
    if div.kind == "kl" and rho + zeta <= 0.5:
        raise ValueError("KL updates need rho + zeta > 1/2 for contraction")
    xi = (rho + zeta) / 2.0

    lam = np.zeros(k)
    w = np.zeros((n, num_c))
    v = np.zeros((n, num_c))
    z_ce = np.zeros(n)
    spans = _chunks(n, cfg.chunk_size)
    cols = _CompactRows.detect(g)
    compact = _CompactRows(g, spans, cols) if cols is not None else None
    q_mat = compact.gram(rho, zeta, n) if compact is not None else precompute_q(cs, rho, zeta)
    pool = ThreadPoolExecutor(max_workers=cfg.worker_count) if cfg.worker_count > 1 else None
    # G^T lambda per sample, refreshed after each lambda update.
    gtl = np.zeros((n, num_c))

    def update_chunk(j, span):
        a = w[span] + rho * gtl[span]
        if div.kind == "kl":
            v[span] = v_update_kl_batch(p[span], a, xi, init=v[span])
        elif div.kind == "ce":
            v[span], _, z_new = v_update_ce_batch(p[span], a, xi, init_z=z_ce[span])
            z_ce[span] = z_new
        else:
            v[span] = np.vstack(
                [v_update_generic(div, p[i], a[i - span.start], xi) for i in range(span.start, span.stop)]
            )
        # The QP's linear term needs rho*v, not v: it collects the w cross
        # term plus the gradient of (rho/2N) sum ||v + G^T l||^2 at fixed v.
        # With plain v the fixed point solves a different problem unless
        # rho == 1.
        x = w[span] + rho * v[span]
        if compact is not None:
            return compact.reduce_rows(j, x)
        return np.einsum("ikc,ic->k", g[span], x)

    def dualvar_chunk(j, span, new_lam):
        if compact is not None:
            compact.gt_lambda(j, new_lam, gtl[span])
        else:
            gtl[span] = np.einsum("ikc,k->ic", g[span], new_lam)
        w[span] += rho * (v[span] + gtl[span])
        resid = v[span] + gtl[span]
        return float(np.einsum("ic,ic->", resid, resid))

    def run(fn, *args):
        if pool is None:
            return [fn(j, s, *args) for j, s in enumerate(spans)]
        return list(pool.map(lambda js: fn(js[0], js[1], *args), enumerate(spans)))

    residuals: list = []
    steps: list = []
    try:
        for it in range(1, max_iters + 1):
            partials = run(update_chunk)
            q_vec = np.zeros(k)
            for part in partials:  # fixed chunk order
                q_vec += part
            q_vec /= n
            new_lam = lambda_qp_solve(q_mat, q_vec, warm=lam)
            sq = run(dualvar_chunk, new_lam)
            primal = math.sqrt(sum(sq) / n)
            steps.append(float(np.linalg.norm(new_lam - lam)))
            lam = new_lam
            residuals.append(primal)
            if not (np.all(np.isfinite(lam)) and np.isfinite(primal)):
                raise NumericBlowupError(f"non-finite iterate at iteration {it}")
            if primal <= cfg.residual_tol:
                return DualSolution(lam, it, residuals, steps)
        err = ConvergenceError(
            f"ADMM stopped after {max_iters} iterations at residual {residuals[-1]:.3e}",
            residual=residuals[-1],
        )
        err.primal_residuals = residuals
        err.lambda_steps = steps
        raise err
    finally:
        if pool is not None:
            pool.shutdown()


def dual_objective(
    lam: np.ndarray, scores: np.ndarray, cs: ConstraintSet, div: Divergence, zeta: float
) -> float:
    """Value of the regularized dual at ``lam`` (KL and CE only)."""
    p = np.asarray(scores, dtype=float)
    g = cs.g
    n = g.shape[0]
    v = -np.einsum("ikc,k->ic", g, lam)
    if div.kind == "kl":
        conj = float(np.mean(kl_conj(v, p)))
    elif div.kind == "ce":
        conj = float(np.mean([ce_conj(v[i], p[i]) for i in range(n)]))
    else:
        raise ValueError("dual objective available for kl and ce kinds only")
    reg = float(np.einsum("ic,ic->", v, v)) / n + float(lam @ lam)
    return conj + 0.5 * zeta * reg


def lambda_max_bound(scores: np.ndarray, cs: ConstraintSet, div: Divergence) -> float:
    """Upper bound on ||lambda*||_1 from the uniform classifier's slack.

    The uniform classifier must be strictly feasible; its divergence from the
    base scores divided by its smallest constraint slack bounds the optimal
    multiplier mass.
    """
    p = np.asarray(scores, dtype=float)
    n, k, num_c = cs.g.shape
    mu = cs.g.sum(axis=(0, 2)) / (n * num_c)  # E[(G h_unif)_k]
    slack = -mu
    if slack.min() <= 0.0:
        worst = int(np.argmin(slack))
        raise InfeasibilityError(
            f"uniform classifier violates constraint row {cs.row_index[worst]}"
        )
    unif = np.full_like(p, 1.0 / num_c)
    dval = float(np.mean(f_divergence(div, unif, p)))
    return dval / float(slack.min())
