"""Lifting paths through a connection, loop holonomy and the Ambrose-Singer check.

A lift solves ``h'(t) = -omega(c'(t)) h(t)`` with ``h(0) = e`` in the fiber
group H, integrated by classical RK4 with a polar projection back onto H
after each step.  With this sign and side the concatenation law
``hat(c2 . c1) = hat(c2) hat(c1)`` holds exactly.

Paths are batched: a :class:`Path` describes B paths at once and returns
points ``x (B, n)``, ``g (B, m, m)`` and frame velocities ``v (B, n + d)``
for a scalar time t.  Piecewise paths report their break points so that
the integrator can align steps with them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import subspace_angles

from . import liegroup as lg
from .algebroid import SCALAR_STEP, directional
from .bundle import BundleError, OutOfChart
from .connection import AdjointConnection, ConnectionForm, curvature_tensor
from .expr import Compiled
from .result import CheckResult, merge

ODE_CONVENTION = "h' = -omega(c') h, h(0) = e"
RANK_CUTOFF = 1e-6
STEP_GUARD = 1.0


class HolonomyError(ValueError):
    pass


class PathLeavesChart(HolonomyError, OutOfChart):
    pass


class StepTooLarge(HolonomyError):
    pass


class NotALoop(HolonomyError):
    pass


# ---------------------------------------------------------------- paths

class Path:
    """B paths on one chart patch, parametrised by t in [0, 1].

    ``fn(t, left)`` returns ``(x, g, v)``.  ``left`` asks for the left limit
    of the velocity at a break point.
    """

    def __init__(self, patch, fn: Callable, size: int, breaks: Sequence[float] = (), label: str = "path"):
        self.patch = patch
        self.fn = fn
        self.size = size
        self.breaks = tuple(sorted(set(float(b) for b in breaks if 0.0 < b < 1.0)))
        self.label = label

    def at(self, t: float, left: bool = False):
        return self.fn(float(t), left)

    def start(self):
        x, g, _ = self.at(0.0)
        return x, g

    def end(self):
        x, g, _ = self.at(1.0, left=True)
        return x, g

    def align(self) -> int:
        """Smallest step count multiple that puts every break on the grid."""
        from fractions import Fraction
        den = 1
        for b in self.breaks:
            f = Fraction(b).limit_denominator(1 << 12)
            den = den * f.denominator // np.gcd(den, f.denominator)
        return den

    def reverse(self) -> "Path":
        def fn(t, left):
            x, g, v = self.at(1.0 - t, not left)
            return x, g, -v
        return Path(self.patch, fn, self.size, [1.0 - b for b in self.breaks], f"rev({self.label})")

    def reparam(self, phi: Callable, dphi: Callable, label: str = "reparam") -> "Path":
        """t -> c(phi(t)) for an increasing phi with phi(0) = 0 and phi(1) = 1."""
        def fn(t, left):
            x, g, v = self.at(phi(t), left)
            return x, g, v * dphi(t)
        return Path(self.patch, fn, self.size, (), f"{label}({self.label})")

    def restrict(self, a: float, b: float) -> "Path":
        def fn(t, left):
            x, g, v = self.at(a + (b - a) * t, left)
            return x, g, v * (b - a)
        breaks = [(s - a) / (b - a) for s in self.breaks if a < s < b]
        return Path(self.patch, fn, self.size, breaks, f"{self.label}[{a},{b}]")

    def right_translate(self, g) -> "Path":
        """R_g o c: fiber multiplied on the right, velocity by TR_g."""
        g = np.asarray(g, dtype=complex)

        def fn(t, left):
            x, h, v = self.at(t, left)
            return x, h @ g, self.patch.tangent_right_action(v, np.broadcast_to(g, h.shape))
        return Path(self.patch, fn, self.size, self.breaks, f"R({self.label})")


def segment(patch, x0, g0, v, label: str = "segment") -> Path:
    """Straight frame path (x0 + t xdot, g0 exp(t xi)) with constant velocity v."""
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    B = x0.shape[0]
    g0 = np.broadcast_to(np.asarray(g0, dtype=complex), (B, patch.group.n, patch.group.n))
    v = np.broadcast_to(np.asarray(v, dtype=float), (B, patch.dim)).copy()
    G = patch.group
    n = patch.n

    def fn(t, left):
        x = x0 + t * v[:, :n]
        g = g0 @ G.exp(t * v[:, n:]) if G.d else np.array(g0)
        return x, g, v
    return Path(patch, fn, B, (), label)


def concat(paths: Sequence[Path], label: str = "concat") -> Path:
    """Run ``paths[0]`` first, then ``paths[1]``, ... each on an equal time slice."""
    K = len(paths)
    if K == 0:
        raise HolonomyError("nothing to concatenate")
    p0 = paths[0]

    def fn(t, left):
        s = t * K
        k = int(np.floor(s))
        if left and k > 0 and np.isclose(s, k):
            k -= 1
        k = min(max(k, 0), K - 1)
        x, g, v = paths[k].at(s - k, left)
        return x, g, v * K
    breaks = [k / K for k in range(1, K)]
    for k, p in enumerate(paths):
        breaks += [(k + b) / K for b in p.breaks]
    return Path(p0.patch, fn, p0.size, breaks, label)


def segments_through(patch, x0, g0, velocities, label: str = "polyline") -> Path:
    """Concatenation of straight frame segments, each starting where the last ended."""
    pieces = []
    x, g = np.atleast_2d(np.asarray(x0, float)), np.asarray(g0, dtype=complex)
    for v in velocities:
        s = segment(patch, x, g, v)
        pieces.append(s)
        x, g = s.end()
    return concat(pieces, label)


def rectangle(patch, corner, g0, plane: Tuple[int, int], sides: Tuple[float, float]) -> Path:
    """Counter-clockwise rectangle in the (a, b) frame plane starting at the corner."""
    a, b = plane
    dim = patch.dim
    if not (0 <= a < dim and 0 <= b < dim) or a == b:
        raise NotALoop(f"bad plane {plane}")
    if a >= patch.n and b >= patch.n:
        G = patch.group
        ea, eb = np.eye(G.d)[a - patch.n], np.eye(G.d)[b - patch.n]
        if np.max(np.abs(G.bracket(ea, eb))) > 0:
            raise NotALoop("rectangles in non-commuting fiber directions do not close")
    s1, s2 = np.broadcast_arrays(*(np.asarray(s, float) for s in sides))
    corner = np.atleast_2d(np.asarray(corner, dtype=float))
    B = corner.shape[0]
    eye = np.eye(dim)
    ua = np.outer(np.broadcast_to(s1, (B,)), eye[a])
    ub = np.outer(np.broadcast_to(s2, (B,)), eye[b])
    return segments_through(patch, corner, np.broadcast_to(g0, (B,) + np.shape(g0)[-2:]),
                            [ua, ub, -ua, -ub], "rectangle")


def function_path(patch, point: Callable, size: int, h: float = 1e-6, label: str = "curve") -> Path:
    """Smooth path from ``point(t) -> (x, g)``; frame velocity by central differences."""
    G = patch.group

    def fn(t, left):
        x, g = point(t)
        xp, gp = point(t + h)
        xm, gm = point(t - h)
        vb = (xp - xm) / (2 * h)
        if G.d:
            gi = G.inv(g)
            vf = (G.coords(_logm_near(gi @ gp)) - G.coords(_logm_near(gi @ gm))) / (2 * h)
            v = np.concatenate([vb, vf], axis=-1)
        else:
            v = vb
        return x, g, v
    return Path(patch, fn, size, (), label)


def _logm_near(g):
    """Logarithm of elements close to the identity by the series of log(1 + A)."""
    eye = np.eye(g.shape[-1])
    A = g - eye
    out = np.zeros_like(A)
    P = np.broadcast_to(eye, A.shape).astype(complex)
    for k in range(1, 8):
        P = P @ A
        out = out + ((-1) ** (k + 1) / k) * P
    return out


def param_path(patch, coords: Sequence[str], g0=None) -> Path:
    """Path from DSL expressions in t: n base coordinates then d fiber coordinates.

    The fiber part is ``g(t) = g0 exp(zeta(t))``.
    """
    n, d = patch.n, patch.d
    if len(coords) not in (n, n + d):
        raise HolonomyError(f"a path needs {n} or {n + d} coordinate expressions, got {len(coords)}")
    comp = [Compiled(c) for c in coords]
    G = patch.group
    g0 = G.identity() if g0 is None else np.asarray(g0, dtype=complex)

    def point(t):
        env = {"t": np.array([t])}
        vals = [np.broadcast_to(np.asarray(c(env), float), (1,)) for c in comp]
        x = np.stack(vals[:n], axis=-1)
        zeta = np.stack(vals[n:], axis=-1) if len(vals) > n else np.zeros((1, d))
        return x, g0[None] @ G.exp(zeta)
    return function_path(patch, point, 1, label="param")


# ---------------------------------------------------------------- lifting

@dataclass
class LiftedPath:
    path: Path
    times: np.ndarray
    h: np.ndarray                # (steps + 1, B, k, k)
    convention: str = ODE_CONVENTION

    @property
    def end(self) -> np.ndarray:
        return self.h[-1]


def _rhs(gamma: ConnectionForm, H: lg.MatrixLieGroup, path: Path, t: float, left: bool = False):
    x, g, v = path.at(t, left)
    return H.matrix(gamma.omega(x, g, v)), x


def lift(gamma: ConnectionForm, path: Path, steps: int = 1024, check_chart: bool = True,
         keep: bool = True, project: bool = True) -> LiftedPath:
    """RK4 solution of h' = -omega(c') h along a batch of paths."""
    if steps < 1:
        raise HolonomyError("steps must be positive")
    al = path.align()
    if steps % al:
        steps += al - steps % al
    H = gamma.algebroid.fiber
    patch = gamma.patch
    dt = 1.0 / steps
    h = H.identity((path.size,))
    hist = [h] if keep else []
    for s in range(steps):
        t = s * dt
        A1, x = _rhs(gamma, H, path, t)
        if check_chart and not np.all(patch.contains(x)):
            raise PathLeavesChart(f"path leaves the chart near t = {t:.4f}")
        if dt * float(np.max(np.linalg.norm(A1, axis=(-2, -1)), initial=0.0)) > STEP_GUARD:
            raise StepTooLarge("omega(c') dt exceeds the step guard; increase steps")
        A2, _ = _rhs(gamma, H, path, t + dt / 2)
        A4, x4 = _rhs(gamma, H, path, t + dt, left=True)
        k1 = -A1 @ h
        k2 = -A2 @ (h + 0.5 * dt * k1)
        k3 = -A2 @ (h + 0.5 * dt * k2)
        k4 = -A4 @ (h + dt * k3)
        h = h + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if project:
            h = H.project(h)
        if keep:
            hist.append(h)
    if check_chart:
        x_end, _ = path.end()
        if not np.all(patch.contains(x_end)):
            raise PathLeavesChart("path ends outside the chart")
    times = np.linspace(0.0, 1.0, steps + 1) if keep else np.array([0.0, 1.0])
    hs = np.stack(hist) if keep else np.stack([H.identity((path.size,)), h])
    return LiftedPath(path, times, hs)


def hat(gamma: ConnectionForm, path: Path, steps: int = 1024, **kw) -> np.ndarray:
    """Endpoint label of the lift, shape (B, k, k)."""
    return lift(gamma, path, steps, keep=False, **kw).end


def _dist(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)), initial=0.0))


# ---------------------------------------------------------------- axioms of the lift

def random_curves(patch, rng: np.random.Generator, size: int, start=None, scale: float = 0.12) -> Path:
    """Smooth random curves x0 + a t + b t^2, g0 exp(t xi1 + t^2 xi2)."""
    G = patch.group
    if start is None:
        x0, g0 = patch.random_points(rng, size, shrink=0.3)
    else:
        x0, g0 = start
    a, b = scale * rng.standard_normal((2, size, patch.n))
    xi1, xi2 = scale * rng.standard_normal((2, size, G.d))
    x0 = np.asarray(x0, float)
    g0 = np.asarray(g0, complex)

    def point(t):
        x = x0 + a * t + b * t * t
        g = g0 @ G.exp(xi1 * t + xi2 * t * t) if G.d else g0
        return x, g
    return function_path(patch, point, size, label="curve")


def lift_properties_check(gamma: ConnectionForm, paths: Optional[Path] = None, seed: int = 0,
                          steps: int = 1024, size: int = 6, tol: float = 1e-5) -> CheckResult:
    """Residuals of the path-connection axioms on random smooth curves.

    constant path, inverse, concatenation, reparametrisation t -> t^2,
    additivity of initial derivatives and equivariance under R_g.
    """
    rng = np.random.default_rng(seed)
    alg = gamma.algebroid
    patch = alg.patch
    H = alg.fiber
    G = patch.group
    c = paths if paths is not None else random_curves(patch, rng, size)
    B = c.size
    eye = H.identity((B,))
    res = {}
    # constant path
    x0, g0 = c.start()
    res["constant"] = _dist(hat(gamma, segment(patch, x0, g0, np.zeros(patch.dim)), 16), eye)
    hc = hat(gamma, c, steps)
    # inverse
    res["inverse"] = _dist(hat(gamma, c.reverse(), steps) @ hc, eye)
    # concatenation with a second curve starting where c ends
    c2 = random_curves(patch, rng, B, start=c.end())
    res["concatenation"] = _dist(hat(gamma, concat([c, c2]), 2 * steps), hat(gamma, c2, steps) @ hc)
    # reparametrisation t -> t^2: endpoint and midpoint
    phi = c.reparam(lambda t: t * t, lambda t: 2 * t, "sq")
    mid = lift(gamma, phi, steps).h[steps // 2]
    res["reparametrization"] = max(_dist(hat(gamma, phi, steps), hc),
                                   _dist(mid, hat(gamma, c.restrict(0.0, 0.25), steps)))
    # additivity of initial derivatives
    res["additivity"] = _additivity(gamma, rng, B)
    # equivariance
    g = G.random(rng)
    lhs = hat(gamma, c.right_translate(g), steps)
    act = alg.action
    rhs = act.right_group(hc, np.broadcast_to(g, (B,) + g.shape))
    res["equivariance"] = _dist(lhs, rhs)
    return merge("lift-axioms", res, tol, "path-connection axioms and lift corollaries",
                 steps=steps, paths=B, convention=ODE_CONVENTION)


def _additivity(gamma: ConnectionForm, rng, B: int, delta: float = 1e-4) -> float:
    """D(v1) + D(v2) = D(v1 + v2) for initial derivatives of lifts at one point."""
    patch = gamma.patch
    x0, g0 = patch.random_points(rng, B, shrink=0.3)
    v1, v2 = rng.standard_normal((2, B, patch.dim))

    def deriv(v):
        # Richardson-extrapolated (h(delta) - e) / delta along straight segments
        e = gamma.algebroid.fiber.identity((B,))
        d1 = (hat(gamma, segment(patch, x0, g0, delta * v), 4) - e) / delta
        d2 = (hat(gamma, segment(patch, x0, g0, 0.5 * delta * v), 4) - e) / (0.5 * delta)
        return 2 * d2 - d1
    return _dist(deriv(v1) + deriv(v2), deriv(v1 + v2))


def convergence_check(gamma: ConnectionForm, path: Optional[Path] = None, seed: int = 0,
                      base_steps: int = 16, ref_steps: int = 2048, min_ratio: float = 8.0,
                      floor: float = 1e-12) -> CheckResult:
    """Endpoint error against a fine reference at N, 2N, 4N steps; order-4 needs ratio >= 8."""
    rng = np.random.default_rng(seed)
    patch = gamma.patch
    c = path if path is not None else random_curves(patch, rng, 4, scale=0.2)
    ref = hat(gamma, c, ref_steps)
    errs = [_dist(hat(gamma, c, base_steps * 2 ** k), ref) for k in range(3)]
    ratios = [a / b for a, b in zip(errs, errs[1:]) if b > floor]
    worst = min(ratios) if ratios else float("inf")
    return CheckResult("rk4-convergence", 1.0 / worst if worst > 0 else float("inf"), 1.0 / min_ratio,
                       "error(N) / error(2N) >= 8", {"errors": errs, "ratios": ratios})


# ---------------------------------------------------------------- loops

def loop_holonomy(gamma: ConnectionForm, x0, g0, loop: dict, steps: int = 1024) -> np.ndarray:
    """Holonomy of one loop spec at (x0, g0).

    ``{"kind": "rectangle", "plane": [a, b], "sides": [s1, s2]}`` with the
    corner at the base point, or ``{"kind": "param", "coords": [...]}``
    whose first and last points must agree with the base point.
    """
    patch = gamma.patch
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    g0 = np.asarray(g0, dtype=complex).reshape((1,) + (patch.group.n,) * 2)
    kind = loop.get("kind")
    if kind == "rectangle":
        corner = np.asarray(loop.get("corner", x0[0]), dtype=float)
        if _dist(corner, x0[0]) > 1e-12:
            # lasso: go to the corner, run the rectangle, come back
            tail = segment(patch, x0, g0, np.concatenate([corner - x0[0], np.zeros(patch.d)]))
            xc, gc = tail.end()
            rect = rectangle(patch, xc, gc, tuple(loop["plane"]), tuple(loop["sides"]))
            ht = hat(gamma, tail, steps)
            hr = hat(gamma, rect, steps)
            return (gamma.algebroid.fiber.inv(ht) @ hr @ ht)[0]
        path = rectangle(patch, x0, g0, tuple(loop["plane"]), tuple(loop["sides"]))
    elif kind == "param":
        path = param_path(patch, loop["coords"], g0[0])
        xs, gs = path.start()
        xe, ge = path.end()
        if _dist(xs, x0) > 1e-9 or _dist(xe, x0) > 1e-9 or _dist(ge, gs) > 1e-9:
            raise NotALoop("path does not start and end at the base point")
    else:
        raise NotALoop(f"unknown loop kind {kind!r}")
    return hat(gamma, path, steps)[0]


@dataclass
class Subspace:
    basis: np.ndarray            # (r, k) orthonormal rows
    singular_values: List[float] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return int(self.basis.shape[0])

    def to_json(self):
        return {"dim": self.dim, "basis": self.basis.tolist()}


def span(vectors, k: int, cutoff: float = RANK_CUTOFF) -> Subspace:
    V = np.asarray(vectors, dtype=float).reshape(-1, k)
    if V.size == 0:
        return Subspace(np.zeros((0, k)))
    _, s, vh = np.linalg.svd(V, full_matrices=False)
    r = int(np.sum(s > cutoff))
    return Subspace(vh[:r], s.tolist())


def bracket_closure(sub: Subspace, H: lg.MatrixLieGroup, cutoff: float = RANK_CUTOFF,
                    max_rounds: int = 10) -> Subspace:
    """Smallest subalgebra containing the subspace."""
    cur = sub
    for _ in range(max_rounds):
        B = cur.basis
        if cur.dim < 2:
            return cur
        brs = [H.bracket(B[i], B[j]) for i in range(len(B)) for j in range(i + 1, len(B))]
        nxt = span(np.vstack([B] + brs), H.d, cutoff)
        if nxt.dim == cur.dim:
            return cur
        cur = nxt
    return cur


def _corners(patch, rng, count: int, x0) -> np.ndarray:
    pts = patch.chart.domain.sample(rng, count, shrink=0.5)
    pts[0] = x0
    return pts


def holonomy_algebra(gamma: ConnectionForm, x0, g0, scales: Sequence[float] = (0.2, 0.1, 0.05, 0.025, 0.0125),
                     corners: int = 8, steps: int = 256, seed: int = 0,
                     cutoff: float = RANK_CUTOFF) -> Subspace:
    """Span of log(holonomy) / area over lasso rectangles, closed under brackets."""
    rng = np.random.default_rng(seed)
    patch = gamma.patch
    H = gamma.algebroid.fiber
    if H.d == 0:
        return Subspace(np.zeros((0, 0)))
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    g0 = np.asarray(g0, dtype=complex).reshape((patch.group.n,) * 2)
    pts = _corners(patch, rng, corners, x0)
    planes = [(a, b) for a in range(patch.n) for b in range(a + 1, patch.n)]
    vecs = []
    B = len(pts)
    # tails from the base point to each corner
    tail = segment(patch, np.broadcast_to(x0, (B, patch.n)), g0,
                   np.concatenate([pts - x0, np.zeros((B, patch.d))], axis=-1))
    ht = hat(gamma, tail, steps)
    xc, gc = tail.end()
    for plane in planes:
        for s in scales:
            rect = rectangle(patch, xc, gc, plane, (s, s))
            hr = hat(gamma, rect, steps)
            hol = H.inv(ht) @ hr @ ht
            for b in range(B):
                try:
                    vecs.append(H.log(hol[b]) / (s * s))
                except lg.OutOfInjectivityRadius:
                    continue
    sub = span(vecs, H.d, cutoff)
    return bracket_closure(sub, H, cutoff)


def curvature_span_lab(gamma: ConnectionForm, x0, g0, grid: int = 8, steps: int = 256, seed: int = 0,
                       cutoff: float = RANK_CUTOFF) -> Subspace:
    """Fiber at the base point of the least sub-LAB holding the curvature and stable under nabla.

    Curvature values at grid points u are carried back to the base by
    parallel transport along straight paths (``Ad(h_u^-1)``); first
    covariant derivatives of the curvature at the base are added, then the
    span is closed under brackets.
    """
    rng = np.random.default_rng(seed)
    patch = gamma.patch
    alg = gamma.algebroid
    H = alg.fiber
    if H.d == 0:
        return Subspace(np.zeros((0, 0)))
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    g0 = np.asarray(g0, dtype=complex).reshape((patch.group.n,) * 2)
    pts = _corners(patch, rng, grid, x0)
    B = len(pts)
    xi = 0.3 * rng.standard_normal((B, patch.d))
    xi[0] = 0.0
    v = np.concatenate([pts - x0, xi], axis=-1)
    path = segment(patch, np.broadcast_to(x0, (B, patch.n)), g0, v)
    hu = hat(gamma, path, steps)
    xu, gu = path.end()
    T = curvature_tensor(gamma, xu, gu)           # (B, dim, dim, k)
    back = H.Ad_matrix(H.inv(hu))                  # (B, k, k)
    vecs = [np.einsum("nij,nabj->nabi", back, T).reshape(-1, H.d)]
    # first covariant derivatives of the curvature at the base point
    nabla = AdjointConnection(gamma)
    xb = x0[None]
    gb = g0[None]
    eye = np.eye(patch.dim)
    for a in range(patch.dim):
        for b in range(a + 1, patch.dim):
            Om = lambda xx, gg, a=a, b=b: curvature_tensor(gamma, xx, gg)[:, a, b]
            for c in range(patch.dim):
                vecs.append(nabla(eye[c], Om, xb, gb))
    sub = span(np.vstack(vecs), H.d, cutoff)
    return bracket_closure(sub, H, cutoff)


def compare_subspaces(a: Subspace, b: Subspace) -> float:
    """Largest principal angle, inf when dimensions differ, 0 for two zero spaces."""
    if a.dim != b.dim:
        return float("inf")
    if a.dim == 0:
        return 0.0
    return float(np.max(subspace_angles(a.basis.T, b.basis.T)))


def contained(a: Subspace, b: Subspace) -> float:
    """Distance of a's basis from b (0 when a lies in b)."""
    if a.dim == 0:
        return 0.0
    if b.dim == 0:
        return float(np.max(np.linalg.norm(a.basis, axis=1)))
    P = b.basis.T @ b.basis
    return float(np.max(np.linalg.norm(a.basis - a.basis @ P, axis=1)))


def ambrose_singer_check(gamma: ConnectionForm, x0=None, g0=None, steps: int = 256, seed: int = 0,
                         corners: int = 8, grid: int = 8, tol: float = 1e-3,
                         expected_dim: Optional[int] = None) -> CheckResult:
    """Holonomy algebra against the curvature-generated sub-LAB at a base point."""
    patch = gamma.patch
    if x0 is None:
        x0 = patch.chart.domain.mid
    if g0 is None:
        g0 = patch.group.identity()
    hol = holonomy_algebra(gamma, x0, g0, steps=steps, seed=seed, corners=corners)
    cur = curvature_span_lab(gamma, x0, g0, grid=grid, steps=steps, seed=seed + 1)
    angle = compare_subspaces(hol, cur)
    inside = contained(hol, cur)
    parts = {"principal-angle": angle, "containment": inside}
    if expected_dim is not None:
        parts["expected-dim"] = 0.0 if hol.dim == cur.dim == expected_dim else float("inf")
    return merge("ambrose-singer", parts, tol, "holonomy algebra = curvature-generated sub-LAB",
                 holonomy_dim=hol.dim, curvature_dim=cur.dim, holonomy_basis=hol.basis.tolist(),
                 curvature_basis=cur.basis.tolist())
