"""f-divergence primitives.

A divergence between probability vectors ``q`` and ``p`` is written
``D_f(q || p) = sum_c p_c f(q_c / p_c)`` for a convex generator ``f`` with
``f(1) = 0``.  Two generators have closed forms used throughout:

* KL:            ``f(t) = t log t``,  ``phi(u) = exp(u - 1)``
* cross-entropy: ``f(t) = -log t``,   ``phi(u) = -1/u`` on ``u < 0``

where ``phi = (f')^{-1}`` is the inverse link that turns dual variables into
multiplicative tilts.  The module provides the convex conjugates of
``D_f(. || p)`` restricted to the simplex and the regularized inner
minimizations

    ``argmin_v  D_f^conj(v, p) + xi ||v||^2 + a^T v``

that the dual solver calls once per sample per iteration.  Batched variants
operate on one row per sample and are the hot path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .exceptions import ConvergenceError

EPS_CLIP = 1e-6

_KL_MAX_ITER = 200
_KL_STEP_TOL = 1e-10
_KL_STAT_TOL = 1e-8
_CE_ROOT_TOL = 1e-12
_CE_MAX_ITER = 200


def _kl_f(t):
    t = np.asarray(t, dtype=float)
    out = np.where(t > 0.0, t * np.log(np.where(t > 0.0, t, 1.0)), 0.0)
    if np.any(t < 0.0):
        raise ValueError("f(t) requires t >= 0")
    return out if out.ndim else float(out)


def _ce_f(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("f(t) requires t >= 0")
    with np.errstate(divide="ignore"):
        out = -np.log(t)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Divergence:
    """A generator ``f`` plus the handles the solvers need.

    ``kind`` selects fast closed-form paths ("kl", "ce"); "generic" routes
    through 1-D searches driven entirely by the supplied handles.
    """

    kind: str
    f: Callable = field(repr=False)
    fprime: Callable = field(repr=False)
    phi: Callable = field(repr=False)

    @staticmethod
    def kl() -> "Divergence":
        return Divergence(
            kind="kl",
            f=_kl_f,
            fprime=lambda t: np.log(t) + 1.0,
            phi=lambda u: np.exp(u - 1.0),
        )

    @staticmethod
    def ce() -> "Divergence":
        return Divergence(
            kind="ce",
            f=_ce_f,
            fprime=lambda t: -1.0 / t,
            phi=lambda u: -1.0 / u,
        )

    @staticmethod
    def generic(f: Callable, fprime: Callable, phi: Callable) -> "Divergence":
        return Divergence(kind="generic", f=f, fprime=fprime, phi=phi)


def from_name(name: str) -> Divergence:
    if name == "kl":
        return Divergence.kl()
    if name == "ce":
        return Divergence.ce()
    raise ValueError(f"unknown divergence {name!r}; expected 'kl' or 'ce'")


def clip_scores(scores: np.ndarray, eps: float = EPS_CLIP) -> np.ndarray:
    """Clip entries into ``[eps, 1]`` and renormalize rows to sum 1.

    Accepts a single probability vector or a matrix with one row per sample.
    """
    p = np.asarray(scores, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValueError("scores must be finite")
    if p.ndim not in (1, 2):
        raise ValueError("scores must be a vector or a matrix")
    q = np.clip(p, eps, 1.0)
    s = q.sum(axis=-1, keepdims=p.ndim == 2)
    return q / s


def _softmax_raw(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=-1, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=-1, keepdims=True)


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along ``axis``."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("softmax input must be finite")
    m = z.max(axis=axis, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=axis, keepdims=True)


def kl_conj(v: np.ndarray, p: np.ndarray):
    """Conjugate of ``D_KL(. || p)`` over the simplex: ``log sum_c p_c e^{v_c}``.

    Max-shifted so large ``v`` does not overflow.  Batched when given
    matching 2-D rows; the gradient in ``v`` is ``softmax(v + log p)``.
    """
    v = np.asarray(v, dtype=float)
    p = np.asarray(p, dtype=float)
    m = v.max(axis=-1, keepdims=True)
    s = np.sum(p * np.exp(v - m), axis=-1)
    out = np.log(s) + np.squeeze(m, axis=-1)
    return out if out.ndim else float(out)


def q_conj_kl(v: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Maximizing simplex point of the KL conjugate: ``softmax(v + log p)``."""
    return softmax(np.asarray(v, dtype=float) + np.log(np.asarray(p, dtype=float)))


def ce_gamma_batch(
    V: np.ndarray, P: np.ndarray, tol: float = 1e-12, max_iter: int = 300
) -> np.ndarray:
    """Row-wise shift solving ``sum_c p_c * (-1 / (v_c + gamma)) = 1``.

    Each row's sum increases monotonically in gamma from 0 at -inf to +inf at
    the pole ``gamma = -max_c v_c``, so a doubling bracket plus bisection
    always succeeds.  Bisection targets ``|sum - 1| <= tol`` per row.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    P = np.atleast_2d(np.asarray(P, dtype=float))
    upper = -V.max(axis=1)
    # One float step below the pole; a fixed 1e-14 offset rounds away when
    # |upper| is large, so take whichever is strictly below.
    hi = np.minimum(upper - 1e-14, np.nextafter(upper, -np.inf))

    def total(g):
        with np.errstate(divide="ignore", over="ignore"):
            return np.sum(P / (-(V + g[:, None])), axis=1)

    width = np.maximum(1.0, np.abs(upper))
    lo = upper - width
    for _ in range(200):
        bad = total(lo) >= 1.0
        if not bad.any():
            break
        width *= 2.0
        lo = np.where(bad, upper - width, lo)
    else:
        raise ConvergenceError("tilt normalization bracket not found")

    out = 0.5 * (lo + hi)
    done = np.zeros(V.shape[0], dtype=bool)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        s = total(mid)
        newly = ~done & (np.abs(s - 1.0) <= tol)
        out = np.where(newly, mid, out)
        done |= newly
        lo = np.where(~done & (s < 1.0), mid, lo)
        hi = np.where(~done & (s >= 1.0), mid, hi)
        collapsed = ~done & (hi - lo <= 4.0 * np.spacing(np.abs(lo)))
        if collapsed.any():
            out = np.where(collapsed, 0.5 * (lo + hi), out)
            done |= collapsed
        if done.all():
            break
    else:
        out = np.where(done, out, 0.5 * (lo + hi))
    resid = float(np.max(np.abs(total(out) - 1.0)))
    if not np.isfinite(resid) or resid > 1e-9:
        raise ConvergenceError("tilt normalization did not converge", residual=resid)
    return out


def _ce_gamma(v: np.ndarray, p: np.ndarray) -> float:
    return float(ce_gamma_batch(np.asarray(v)[None, :], np.asarray(p)[None, :])[0])


def ce_conj(v: np.ndarray, p: np.ndarray) -> float:
    """Conjugate of the cross-entropy divergence over the simplex.

    The maximizing ``q`` has ``q_c = p_c / (mu - v_c)`` with ``mu`` chosen so
    ``q`` sums to 1; the value is ``v . q - sum_c p_c log(mu - v_c)``.
    """
    v = np.asarray(v, dtype=float)
    p = np.asarray(p, dtype=float)
    gamma = _ce_gamma(v, p)
    q = p / (-(v + gamma))
    return float(v @ q - p @ np.log(-(v + gamma)))


def v_update_kl_batch(
    P: np.ndarray,
    A: np.ndarray,
    xi: float,
    init: np.ndarray | None = None,
    max_iter: int = _KL_MAX_ITER,
    step_tol: float = _KL_STEP_TOL,
    stat_tol: float = _KL_STAT_TOL,
) -> np.ndarray:
    """Row-wise ``argmin_v  logsumexp(v + log p) + xi ||v||^2 + a^T v``.

    Fixed-point iteration on ``z = v + log p``: the stationarity condition
    rearranges to ``z = -(softmax(z) + b) / (2 xi)`` with
    ``b = a - 2 xi log p``, a contraction for ``xi > 1/4`` because softmax is
    1/2-Lipschitz.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if xi <= 0.0:
        raise ValueError("xi must be positive")
    logP = np.log(P)
    B = A - 2.0 * xi * logP
    z = (init + logP) if init is not None else -B / (2.0 * xi)
    z = np.atleast_2d(np.asarray(z, dtype=float)).copy()
    inv = -1.0 / (2.0 * xi)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(max_iter):
            z_new = inv * (_softmax_raw(z) + B)
            delta = np.max(np.abs(z_new - z))
            z = z_new
            if delta <= step_tol:
                break
        resid = np.max(np.abs(_softmax_raw(z) + 2.0 * xi * z + B))
    if not np.isfinite(resid) or resid > stat_tol:
        raise ConvergenceError(
            f"KL inner update stalled at residual {resid:.3e}", residual=float(resid)
        )
    return z - logP


def v_update_kl(p, a, xi: float, init=None) -> np.ndarray:
    """Single-sample form of :func:`v_update_kl_batch`."""
    init2 = None if init is None else np.atleast_2d(np.asarray(init, dtype=float))
    return v_update_kl_batch(p, a, xi, init=init2)[0]


def _sqrt_diff(s: np.ndarray, m: np.ndarray) -> np.ndarray:
    """``sqrt(s^2 + m) - s`` without cancellation for large positive ``s``."""
    u = np.sqrt(s * s + m)
    return np.where(s > 0.0, m / (u + s), u - s)


class CeUpdate(NamedTuple):
    v: np.ndarray
    theta: float
    q: np.ndarray


def v_update_ce_batch(
    P: np.ndarray,
    A: np.ndarray,
    xi: float,
    init_z: np.ndarray | None = None,
    tol: float = _CE_ROOT_TOL,
    max_iter: int = _CE_MAX_ITER,
):
    """Row-wise cross-entropy inner update.

    Each row reduces to the scalar root of

        ``g(z) = -1 + sum_c [ sqrt((z + a_c/2)^2 + 2 p_c xi) - (z + a_c/2) ]``

    which is strictly decreasing and convex, falling from +inf to -1, so the
    root is unique.  Safeguarded Newton with an outward-doubling bracket and
    bisection fallback; returns ``(V, Q, z)`` with ``q_c`` the recovered
    simplex weights and ``v = -(a + q) / (2 xi)``.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if xi <= 0.0:
        raise ValueError("xi must be positive")
    n = P.shape[0]
    m = 2.0 * xi * P
    half = 0.5 * A

    def g_and_slope(z):
        s = z[:, None] + half
        u = np.sqrt(s * s + m)
        g = np.sum(_sqrt_diff(s, m), axis=1) - 1.0
        slope = np.sum(s / u, axis=1) - P.shape[1]
        return g, slope

    z = np.zeros(n) if init_z is None else np.asarray(init_z, dtype=float).copy()
    g, slope = g_and_slope(z)
    # Bracket [lo, hi] with g(lo) > 0 > g(hi); g decreasing guarantees one
    # exists on each side of the root.
    lo = np.where(g > 0.0, z, -np.inf)
    hi = np.where(g <= 0.0, z, np.inf)
    step = 1.0 + np.abs(z)
    probe = z.copy()
    for _ in range(200):
        need_hi = ~np.isfinite(hi)
        need_lo = ~np.isfinite(lo)
        if not (need_hi.any() or need_lo.any()):
            break
        probe = np.where(need_hi, np.where(np.isfinite(lo), lo, z) + step, probe)
        probe = np.where(need_lo, np.where(np.isfinite(hi), hi, z) - step, probe)
        gp, _ = g_and_slope(probe)
        hi = np.where(need_hi & (gp <= 0.0), probe, hi)
        lo = np.where(need_hi & (gp > 0.0), np.maximum(lo, probe), lo)
        lo = np.where(need_lo & (gp > 0.0), probe, lo)
        hi = np.where(need_lo & (gp <= 0.0), np.minimum(hi, probe), hi)
        step *= 2.0
    else:
        raise ConvergenceError("cross-entropy root bracket not found")

    z = np.clip(z, lo, hi)
    g, slope = g_and_slope(z)
    done = np.abs(g) <= tol
    for _ in range(max_iter):
        if done.all():
            break
        lo = np.where(g > 0.0, z, lo)
        hi = np.where(g <= 0.0, z, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = z - g / slope
        bad = ~np.isfinite(newton) | (newton <= lo) | (newton >= hi)
        cand = np.where(bad, 0.5 * (lo + hi), newton)
        z = np.where(done, z, cand)
        g, slope = g_and_slope(z)
        done = done | (np.abs(g) <= tol) | (hi - lo <= np.spacing(np.abs(z)))
    g, _ = g_and_slope(z)
    worst = float(np.max(np.abs(g)))
    if not np.isfinite(worst) or worst > tol:
        raise ConvergenceError(
            f"cross-entropy inner update stalled at |g| = {worst:.3e}", residual=worst
        )
    s = z[:, None] + half
    Q = _sqrt_diff(s, m)
    V = -(A + Q) / (2.0 * xi)
    return V, Q, z


def v_update_ce(p, a, xi: float, init_z: float | None = None) -> CeUpdate:
    """Single-sample form of :func:`v_update_ce_batch`."""
    init = None if init_z is None else np.asarray([init_z], dtype=float)
    V, Q, z = v_update_ce_batch(p, a, xi, init_z=init)
    return CeUpdate(v=V[0], theta=float(z[0]) / xi, q=Q[0])


def _inner_q(div: Divergence, p_c: float, a_c: float, xi: float, theta: float, tol: float = 1e-10):
    """Minimize ``p f(q/p) + (a+q)^2/(4 xi) + theta q`` over ``q >= 0``.

    The derivative ``f'(q/p) + (a+q)/(2 xi) + theta`` increases in ``q``;
    bisect on its sign.  A boundary minimum at q = 0 occurs only when f' is
    bounded below at 0.
    """

    def deriv(q):
        return float(div.fprime(q / p_c)) + (a_c + q) / (2.0 * xi) + theta

    q_hi = p_c
    for _ in range(400):
        if deriv(q_hi) > 0.0:
            break
        q_hi *= 2.0
    else:
        raise ConvergenceError("inner minimization upper bracket not found")
    q_lo = q_hi / 2.0
    for _ in range(400):
        if deriv(q_lo) < 0.0:
            break
        q_lo /= 2.0
        if q_lo < 1e-200:
            return 0.0
    while q_hi - q_lo > tol:
        mid = 0.5 * (q_lo + q_hi)
        if deriv(mid) < 0.0:
            q_lo = mid
        else:
            q_hi = mid
    return 0.5 * (q_lo + q_hi)


def v_update_generic(
    div: Divergence,
    p: np.ndarray,
    a: np.ndarray,
    xi: float,
    theta_tol: float = 1e-9,
    q_tol: float = 1e-10,
) -> np.ndarray:
    """Inner update for an arbitrary generator via its dual reduction.

    Maximizes ``F(theta) = -theta + sum_c min_{q_c >= 0} [ p_c f(q_c/p_c)
    + (a_c + q_c)^2 / (4 xi) + theta q_c ]`` (concave in theta, golden
    section) with each inner minimization solved by bisection; the update is
    recovered as ``v = -(q + a) / (2 xi)``.
    """
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    if xi <= 0.0:
        raise ValueError("xi must be positive")

    def q_of(theta):
        return np.array([_inner_q(div, p[c], a[c], xi, theta, q_tol) for c in range(p.size)])

    def value(theta):
        q = q_of(theta)
        with np.errstate(divide="ignore"):
            fq = np.where(q > 0.0, p * np.asarray(div.f(np.where(q > 0.0, q, 1.0) / p)), p * np.asarray(div.f(0.0)))
        return -theta + float(np.sum(fq + (a + q) ** 2 / (4.0 * xi) + theta * q))

    # Bracket the maximizer by the sign of F'(theta) = -1 + sum_c q_c(theta).
    lo = hi = 0.0
    step = 1.0
    for _ in range(300):
        if np.sum(q_of(hi)) < 1.0:
            break
        hi += step
        step *= 2.0
    else:
        raise ConvergenceError("outer maximization upper bracket not found")
    step = 1.0
    for _ in range(300):
        if np.sum(q_of(lo)) > 1.0:
            break
        lo -= step
        step *= 2.0
    else:
        raise ConvergenceError("outer maximization lower bracket not found")

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = value(x1), value(x2)
    while hi - lo > theta_tol:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = value(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = value(x2)
    theta = 0.5 * (lo + hi)
    q = q_of(theta)
    return -(q + a) / (2.0 * xi)


def f_divergence(div: Divergence, q: np.ndarray, p: np.ndarray):
    """``D_f(q || p) = sum_c p_c f(q_c / p_c)``, row-wise for matrices."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    vals = p * np.asarray(div.f(q / p))
    out = vals.sum(axis=-1)
    return out if out.ndim else float(out)
