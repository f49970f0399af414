"""Gauss-Legendre rules, composite panel integration, adaptive oracles."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import MaxDepthExceeded, NonFiniteIntegrand, UnsupportedOrder

MAX_DEPTH = 60
ROUNDOFF = 50.0 * np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss-Legendre rule on ``[0, 1]``."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def symmetric_nodes(self) -> np.ndarray:
        """Nodes mapped back to ``[-1, 1]``."""
        return 2.0 * self.nodes - 1.0


@dataclass(frozen=True)
class AdaptiveResult:
    value: float
    error_estimate: float
    subdivisions: int


@lru_cache(maxsize=None)
def gauss_rule(order: int) -> QuadratureRule:
    if not 1 <= order <= 64:
        raise UnsupportedOrder(f"Gauss order must be in 1..64, got {order}")
    x, w = np.polynomial.legendre.leggauss(order)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(order, nodes, weights)


def composite_integrate(f: Callable, panels, rule: QuadratureRule) -> float:
    """Sum of ``width * sum_k w_k f(lo + node_k * width)`` over panels.

    ``panels`` is a sequence of ``(lo, hi)`` pairs or objects with ``t_lo`` and
    ``width`` attributes.  ``f`` is called once on the flattened node array.
    """
    lo, width = _panel_bounds(panels)
    t = lo[:, None] + rule.nodes[None, :] * width[:, None]
    vals = np.asarray(f(t.ravel()), dtype=float).reshape(t.shape)
    if not np.all(np.isfinite(vals)):
        k = int(np.flatnonzero(~np.isfinite(vals.ravel()))[0])
        node = float(t.ravel()[k])
        raise NonFiniteIntegrand(f"integrand is not finite at t = {node!r}", node)
    return math.fsum((width[:, None] * rule.weights[None, :] * vals).ravel())


def _panel_bounds(panels) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(panels, "t_lo") and hasattr(panels, "width"):
        return np.asarray(panels.t_lo, dtype=float), np.asarray(panels.width, dtype=float)
    first = panels[0] if len(panels) else None
    if first is not None and hasattr(first, "t_lo"):
        lo = np.array([p.t_lo for p in panels], dtype=float)
        return lo, np.array([p.width for p in panels], dtype=float)
    arr = np.asarray(panels, dtype=float).reshape(-1, 2)
    return arr[:, 0], arr[:, 1] - arr[:, 0]


def _pair_estimates(f, a: float, b: float, lo_rule: QuadratureRule, hi_rule: QuadratureRule):
    w = b - a
    t_lo = a + lo_rule.nodes * w
    t_hi = a + hi_rule.nodes * w
    vals = np.asarray(f(np.concatenate([t_lo, t_hi])), dtype=float)
    if not np.all(np.isfinite(vals)):
        k = int(np.flatnonzero(~np.isfinite(vals))[0])
        node = float(np.concatenate([t_lo, t_hi])[k])
        raise NonFiniteIntegrand(f"integrand is not finite at t = {node!r}", node)
    g = lo_rule.order
    coarse = w * float(np.dot(lo_rule.weights, vals[:g]))
    fine = w * float(np.dot(hi_rule.weights, vals[g:]))
    magnitude = abs(w) * float(np.dot(hi_rule.weights, np.abs(vals[g:])))
    return fine, abs(fine - coarse), magnitude


def adaptive_integrate(
    f: Callable, interval: tuple[float, float], tol: float = 1e-12, order: int = 10, vectorized: bool = True
) -> AdaptiveResult:
    """Globally adaptive bisection with a Gauss pair of orders ``order`` and ``2 * order``.

    The interval with the largest error estimate is bisected until the sum of
    estimates is at most ``tol``.  Estimates already at the rounding floor
    (``50 eps * int |f|`` over the interval) are treated as converged.  Ties
    are broken by position, so the subdivision sequence is deterministic.
    """
    a, b = map(float, interval)
    if b == a:
        return AdaptiveResult(0.0, 0.0, 0)
    if not vectorized:
        scalar = f
        f = lambda t: np.array([scalar(float(x)) for x in t])  # noqa: E731
    lo_rule, hi_rule = gauss_rule(order), gauss_rule(2 * order)

    def estimate(lo, hi, depth):
        value, err, magnitude = _pair_estimates(f, lo, hi, lo_rule, hi_rule)
        active = err if err > ROUNDOFF * magnitude else 0.0
        return (-active, lo, hi, depth, value, err)

    heap = [estimate(a, b, 0)]
    pending = -heap[0][0]
    splits = 0
    while pending > tol and heap[0][0] < 0.0:
        neg, lo, hi, depth, _, _ = heapq.heappop(heap)
        if depth >= MAX_DEPTH:
            raise MaxDepthExceeded(f"no convergence on [{lo!r}, {hi!r}] after {MAX_DEPTH} bisections")
        mid = 0.5 * (lo + hi)
        left, right = estimate(lo, mid, depth + 1), estimate(mid, hi, depth + 1)
        heapq.heappush(heap, left)
        heapq.heappush(heap, right)
        splits += 1
        pending = math.fsum(-item[0] for item in heap)
    parts = sorted(heap, key=lambda item: item[1])
    return AdaptiveResult(math.fsum(p[4] for p in parts), math.fsum(p[5] for p in parts), splits)


def adaptive_integrate_batch(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    tol: float = 1e-12,
    order: int = 10,
    owner: np.ndarray | None = None,
    n_out: int | None = None,
    with_noise: bool = False,
) -> np.ndarray:
    """Adaptive integration of many integrands at once.

    ``f(index, t)`` evaluates integrand ``index[k]`` at ``t[k]``.  Without
    ``owner`` interval ``k`` belongs to integrand ``k``; with it, several
    starting intervals may share one integrand and their results are summed.
    Each interval must meet its length share of ``tol`` (or the rounding
    floor); all open intervals are processed in vectorized sweeps.  Integrable
    endpoint singularities need pre-split starting intervals here.

    With ``with_noise`` the integrand returns ``(values, noise)`` where
    ``noise`` bounds the absolute size of rounding errors in ``values`` (for
    instance ``|kernel| * max|density|``); the rounding floor then uses it in
    place of ``|values|``.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if owner is None:
        owner = np.arange(len(lo))
        n_out = len(lo)
    owner = np.asarray(owner, dtype=np.int64)
    n_out = int(owner.max()) + 1 if n_out is None else n_out
    lo_rule, hi_rule = gauss_rule(order), gauss_rule(2 * order)
    nodes = np.concatenate([lo_rule.nodes, hi_rule.nodes])
    total = np.zeros(n_out)
    np.add.at(total, owner, np.abs(hi - lo))
    result = np.zeros(n_out)
    live = hi != lo
    idx, a, b = owner[live], lo[live], hi[live]
    depth = 0
    while len(idx):
        w = b - a
        t = a[:, None] + w[:, None] * nodes[None, :]
        out = f(np.repeat(idx, len(nodes)), t.ravel())
        if with_noise:
            out, noise = out
            noise = np.asarray(noise, dtype=float).reshape(t.shape)
        vals = np.asarray(out, dtype=float).reshape(t.shape)
        if not np.all(np.isfinite(vals)):
            k = int(np.flatnonzero(~np.isfinite(vals.ravel()))[0])
            raise NonFiniteIntegrand("integrand is not finite", float(t.ravel()[k]))
        coarse = w * (vals[:, :order] @ lo_rule.weights)
        fine = w * (vals[:, order:] @ hi_rule.weights)
        err = np.abs(fine - coarse)
        scale = noise if with_noise else np.abs(vals)
        magnitude = np.abs(w) * (scale[:, order:] @ hi_rule.weights)
        done = err <= np.maximum(tol * np.abs(w) / total[idx], ROUNDOFF * magnitude)
        np.add.at(result, idx[done], fine[done])
        keep = ~done
        if not np.any(keep):
            break
        depth += 1
        if depth > MAX_DEPTH:
            raise MaxDepthExceeded(f"batch integration did not converge after {MAX_DEPTH} bisections")
        idx, a, b = idx[keep], a[keep], b[keep]
        mid = 0.5 * (a + b)
        idx = np.concatenate([idx, idx])
        a, b = np.concatenate([a, mid]), np.concatenate([mid, b])
    return result
