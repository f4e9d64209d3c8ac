"""
Numerical primitives shared by every other service:
  - composite Gauss-Legendre quadrature (fixed panels, breakpoint-aligned)
  - bracketed root finding
  - regularized symmetric solves
  - finite-difference derivatives on uniform samples
"""
import logging
import math
from collections.abc import Callable, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigvalsh, solve

from qtraj.exceptions import (
    BracketError,
    DomainError,
    EvaluationError,
    ShapeError,
    SingularSystemError,
    SymmetryError,
)
from qtraj.models.grid import QuadratureRule

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-10
DEFAULT_RIDGE_FACTOR = 1e-8


# ── Quadrature ───────────────────────────────────────────────────────────────

def composite_nodes(interval: tuple[float, float], rule: QuadratureRule) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of `rule` mapped onto [a, b] (a < b)."""
    a, b = interval
    if not (np.isfinite(a) and np.isfinite(b)) or b < a:
        raise DomainError(f"invalid interval [{a}, {b}]")
    ref_x = np.asarray(rule.reference_nodes)
    ref_w = np.asarray(rule.reference_weights)
    h = (b - a) / rule.panels
    centers = a + h * (np.arange(rule.panels) + 0.5)
    nodes = (centers[:, None] + 0.5 * h * ref_x[None, :]).ravel()
    weights = np.broadcast_to(0.5 * h * ref_w, (rule.panels, rule.nodes)).ravel()
    return nodes, weights.copy()


def piecewise_nodes(
        breakpoints: Sequence[float],
        max_width: float,
        nodes_per_panel: int = 8,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre nodes on sorted breakpoints, each piece split into panels no
    wider than `max_width`. Panel edges always include every breakpoint.
    """
    edges = np.unique(np.asarray(breakpoints, dtype=float))
    if edges.size < 2:
        raise DomainError("need at least two distinct breakpoints")
    if max_width <= 0:
        raise DomainError(f"panel width must be positive, got {max_width}")
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        panels = max(1, math.ceil((b - a) / max_width - 1e-12))
        x, w = composite_nodes((a, b), QuadratureRule(panels=panels, nodes=nodes_per_panel))
        nodes.append(x)
        weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)


def integrate(
        f: Callable[[np.ndarray], np.ndarray],
        interval: tuple[float, float],
        rule: QuadratureRule,
) -> float | complex:
    """
    Composite Gauss-Legendre integral of a vectorized integrand.
    Zero-length intervals integrate to 0.
    """
    a, b = interval
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    x, w = composite_nodes((a, b), rule)
    values = np.asarray(f(x))
    if values.shape != x.shape:
        raise ShapeError(f"integrand returned shape {values.shape} for {x.shape} nodes")
    if not np.all(np.isfinite(values)):
        raise EvaluationError(f"non-finite integrand on [{a}, {b}]")
    result = sign * np.dot(w, values)
    return complex(result) if np.iscomplexobj(result) else float(result)


# ── Roots ────────────────────────────────────────────────────────────────────

def find_root_bracketed(
        g: Callable[[float], float],
        bracket: tuple[float, float],
        tol: float = 1e-14,
        max_iter: int = 200,
) -> float:
    """
    Bisection on [a, b] with g(a) g(b) <= 0.
    Stops when the bracket is narrower than `tol`, when g hits 0 exactly,
    or when the midpoint can no longer move in floating point.
    """
    a, b = float(bracket[0]), float(bracket[1])
    ga, gb = g(a), g(b)
    if not (np.isfinite(ga) and np.isfinite(gb)):
        raise EvaluationError(f"g is not finite at the bracket ends ({ga}, {gb})")
    if ga == 0.0:
        return a
    if gb == 0.0:
        return b
    if np.sign(ga) == np.sign(gb):
        raise BracketError(f"no sign change on [{a}, {b}]: g(a)={ga:.3e}, g(b)={gb:.3e}")

    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        if b - a <= tol or mid in (a, b):
            return mid
        gm = g(mid)
        if not np.isfinite(gm):
            raise EvaluationError(f"g({mid}) is not finite")
        if gm == 0.0:
            return mid
        if np.sign(gm) == np.sign(ga):
            a, ga = mid, gm
        else:
            b = mid
    return 0.5 * (a + b)


# ── Linear algebra ───────────────────────────────────────────────────────────

def default_ridge(G: np.ndarray) -> float:
    dim = G.shape[0]
    return DEFAULT_RIDGE_FACTOR * float(np.trace(G)) / dim if dim else 0.0


def solve_regularized_symmetric(
        G: np.ndarray,
        b: np.ndarray,
        ridge: float | None = None,
) -> np.ndarray:
    """
    Solve (G + ridge I) c = b for symmetric positive semidefinite G.

    Cholesky is tried first. If the factorization fails the spectrum is inspected:
    near-null directions make the system singular, otherwise a general symmetric
    solve is used.
    """
    G = np.asarray(G, dtype=float)
    b = np.asarray(b, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1] or b.shape[:1] != G.shape[:1]:
        raise ShapeError(f"incompatible shapes G{G.shape}, b{b.shape}")
    dim = G.shape[0]
    if dim == 0:
        return np.zeros_like(b)

    scale = float(np.max(np.abs(G)))
    asym = float(np.max(np.abs(G - G.T)))
    if asym > SYMMETRY_TOL * max(scale, 1.0):
        raise SymmetryError(f"matrix is not symmetric (max |G - G^T| = {asym:.3e})")

    if ridge is None:
        ridge = default_ridge(G)
    if ridge < 0:
        raise DomainError(f"ridge must be nonnegative, got {ridge}")
    A = G + ridge * np.eye(dim)

    try:
        factor = cho_factor(A, lower=False, check_finite=True)
        return cho_solve(factor, b)
    except LinAlgError:
        logger.debug("[Solve] Cholesky failed (dim=%d, ridge=%.3e), inspecting spectrum", dim, ridge)

    eigenvalues = eigvalsh(A)
    top = float(np.max(np.abs(eigenvalues))) or 1.0
    near_null = int(np.sum(np.abs(eigenvalues) <= dim * np.finfo(float).eps * top))
    if near_null:
        raise SingularSystemError(
            f"system has {near_null} near-null direction(s) at ridge={ridge:.3e}",
            near_null=near_null,
        )
    return solve(A, b, assume_a="sym")


# ── Finite differences ───────────────────────────────────────────────────────

def differentiate(values: np.ndarray, coords: np.ndarray, axis: int = 0) -> np.ndarray:
    """
    d values / d coords along `axis`. Uniform samples use 5-point centered
    differences in the interior; others fall back to second-order np.gradient.
    """
    coords = np.asarray(coords, dtype=float)
    values = np.asarray(values)
    n = coords.size
    if values.shape[axis] != n:
        raise ShapeError(f"axis {axis} has {values.shape[axis]} samples, coordinates have {n}")
    if n < 3:
        raise ShapeError("need at least 3 samples to differentiate")
    steps = np.diff(coords)
    uniform = np.allclose(steps, steps[0], rtol=1e-9, atol=0.0)
    if not uniform or n < 5:
        return np.gradient(values, coords, axis=axis, edge_order=2)

    h = steps[0]
    moved = np.moveaxis(values, axis, 0)
    out = np.gradient(moved, h, axis=0, edge_order=2)
    out[2:-2] = (moved[:-4] - 8.0 * moved[1:-3] + 8.0 * moved[3:-1] - moved[4:]) / (12.0 * h)
    return np.moveaxis(out, 0, axis)
