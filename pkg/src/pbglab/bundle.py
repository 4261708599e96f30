"""Charted principal bundles P(M, G).

A chart ``U_i`` is an open box or ball in R^n with named coordinates; over it
the bundle is ``U_i x G``.  Points are stored chart-locally as ``(x, g)``.
Tangent vectors use the left trivialisation of TG: a fiber velocity
``g' = g xi`` is stored as the algebra coordinates of ``xi``, so a tangent
vector at ``(x, g)`` is one real array of length ``n + d``.  Batched code
passes ``x`` with shape (N, n) and ``g`` with shape (N, m, m).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import liegroup as lg
from .expr import Compiled


class BundleError(ValueError):
    pass


class OutOfChart(BundleError):
    pass


class CocycleFailure(BundleError):
    pass


# ---------------------------------------------------------------- domains

@dataclass(frozen=True)
class Domain:
    kind: str                  # "box" or "ball"
    lo: np.ndarray = field(default=None, repr=False)
    hi: np.ndarray = field(default=None, repr=False)
    center: np.ndarray = field(default=None, repr=False)
    radius: float = 0.0

    @staticmethod
    def box(bounds) -> "Domain":
        b = np.asarray(bounds, dtype=float)
        if b.ndim != 2 or b.shape[1] != 2 or np.any(b[:, 0] >= b[:, 1]):
            raise BundleError("box bounds must be [[lo, hi], ...] with lo < hi")
        return Domain("box", lo=b[:, 0], hi=b[:, 1])

    @staticmethod
    def ball(center, radius: float) -> "Domain":
        if radius <= 0:
            raise BundleError("ball radius must be positive")
        return Domain("ball", center=np.asarray(center, dtype=float), radius=float(radius))

    @property
    def dim(self) -> int:
        return len(self.lo) if self.kind == "box" else len(self.center)

    @property
    def mid(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi) if self.kind == "box" else np.array(self.center)

    def contains(self, x, margin: float = 0.0) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "box":
            return np.all((x > self.lo + margin) & (x < self.hi - margin), axis=-1)
        return np.linalg.norm(x - self.center, axis=-1) < self.radius - margin

    def sample(self, rng: np.random.Generator, size: int, shrink: float = 0.9) -> np.ndarray:
        if self.kind == "box":
            mid, half = 0.5 * (self.lo + self.hi), 0.5 * (self.hi - self.lo) * shrink
            return mid + half * rng.uniform(-1.0, 1.0, (size, self.dim))
        v = rng.standard_normal((size, self.dim))
        v /= np.linalg.norm(v, axis=-1, keepdims=True)
        r = self.radius * shrink * rng.uniform(0.0, 1.0, (size, 1)) ** (1.0 / self.dim)
        return self.center + r * v

    def to_json(self) -> dict:
        if self.kind == "box":
            return {"box": np.stack([self.lo, self.hi], 1).tolist()}
        return {"ball": {"center": self.center.tolist(), "radius": self.radius}}


def domain_from_json(obj, dim: int) -> Domain:
    if "box" in obj:
        dom = Domain.box(obj["box"])
    elif "ball" in obj:
        dom = Domain.ball(obj["ball"]["center"], obj["ball"]["radius"])
    else:
        raise BundleError("domain needs a 'box' or a 'ball'")
    if dom.dim != dim:
        raise BundleError(f"domain has dimension {dom.dim}, expected {dim}")
    return dom


# ---------------------------------------------------------------- charts and points

@dataclass(frozen=True)
class Chart:
    name: str
    vars: Tuple[str, ...]
    domain: Domain


class Patch:
    """One chart of the bundle, ``U_i x G``, with batched point utilities."""

    def __init__(self, chart: Chart, group: lg.MatrixLieGroup):
        self.chart = chart
        self.group = group
        self.n = len(chart.vars)
        self.d = group.d
        self.dim = self.n + self.d

    @property
    def vars(self) -> Tuple[str, ...]:
        return self.chart.vars

    def env(self, x, g) -> dict:
        """DSL bindings for base coordinates and fiber matrix entries."""
        x = np.asarray(x, dtype=float)
        env = {name: x[..., a] for a, name in enumerate(self.chart.vars)}
        env.update(self.group.fiber_env(g))
        return env

    def flow(self, x, g, v, eps):
        """Point reached from (x, g) along the frame vector v for time eps.

        Base coordinates move linearly; the fiber moves along g exp(eps xi).
        ``eps`` may be a scalar or broadcast against the batch.
        """
        v = np.asarray(v, dtype=float)
        eps = np.asarray(eps, dtype=float)
        e = eps[..., None] if eps.ndim else eps
        x2 = np.asarray(x, dtype=float) + e * v[..., : self.n]
        if self.d == 0:
            return x2, np.array(g, dtype=complex, copy=True)
        return x2, np.asarray(g) @ self.group.exp(e * v[..., self.n:])

    def random_points(self, rng: np.random.Generator, size: int, shrink: float = 0.8):
        x = self.chart.domain.sample(rng, size, shrink)
        g = self.group.random(rng, size)
        return x, g

    def right_action(self, x, g, h):
        return np.array(x, copy=True), np.asarray(g) @ np.asarray(h)

    def tangent_right_action(self, v, h) -> np.ndarray:
        """TR_h in the left trivialisation: (xdot, xi) -> (xdot, Ad(h^-1) xi)."""
        v = np.asarray(v, dtype=float)
        out = np.array(v, copy=True)
        if self.d:
            out[..., self.n:] = self.group.Ad(self.group.inv(h), v[..., self.n:])
        return out

    def vertical_component(self, v) -> np.ndarray:
        out = np.array(v, dtype=float, copy=True)
        out[..., : self.n] = 0.0
        return out

    def frame_bracket(self, a, b) -> np.ndarray:
        """Bracket of two constant-coefficient frame fields."""
        a = np.asarray(a, dtype=float)
        out = np.zeros(np.broadcast(a, b).shape)
        if self.d:
            out[..., self.n:] = self.group.bracket(a[..., self.n:], np.asarray(b)[..., self.n:])
        return out

    def contains(self, x) -> np.ndarray:
        return self.chart.domain.contains(x)


@dataclass(frozen=True)
class BundlePoint:
    chart: int
    x: np.ndarray
    g: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class TangentVec:
    point: BundlePoint
    xdot: np.ndarray
    xi: np.ndarray

    @property
    def frame(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.xdot, float), np.asarray(self.xi, float)])


# ---------------------------------------------------------------- the bundle

MatrixFn = Callable[[np.ndarray], np.ndarray]
CoordFn = Callable[[np.ndarray], np.ndarray]


@dataclass
class Overlap:
    i: int
    j: int
    gij: MatrixFn                         # chart-i coordinates -> G
    coords_j: Optional[CoordFn] = None    # chart-i coordinates -> chart-j coordinates
    coords_i: Optional[CoordFn] = None    # chart-j coordinates -> chart-i coordinates


class ChartedBundle:
    """Principal bundle given by charts and transition functions g_ij.

    Convention: a point with fiber coordinate ``h_i`` in chart i and ``h_j``
    in chart j satisfies ``h_i = g_ij(x) h_j``, hence the cocycle
    ``g_ij g_jk = g_ik``.
    """

    def __init__(self, group: lg.MatrixLieGroup, charts: Sequence[Chart],
                 overlaps: Sequence[Overlap] = (), name: str = "bundle",
                 check: bool = True, samples: int = 200, seed: int = 0):
        if not charts:
            raise BundleError("a bundle needs at least one chart")
        dims = {len(c.vars) for c in charts}
        if len(dims) != 1:
            raise BundleError("all charts must have the same dimension")
        self.name = name
        self.group = group
        self.charts = list(charts)
        self.base_dim = dims.pop()
        self._over: Dict[Tuple[int, int], Overlap] = {}
        for ov in overlaps:
            self._add_overlap(ov)
        self.patches = [Patch(c, group) for c in self.charts]
        if check:
            report = self.cocycle_check(samples=samples, seed=seed)
            if report["max_residual"] > 1e-8:
                raise CocycleFailure(f"cocycle residual {report['max_residual']:.3e}")

    def _add_overlap(self, ov: Overlap) -> None:
        n = len(self.charts)
        if not (0 <= ov.i < n and 0 <= ov.j < n) or ov.i == ov.j:
            raise BundleError(f"bad overlap indices ({ov.i}, {ov.j})")
        self._over[(ov.i, ov.j)] = ov

    def patch(self, i: int) -> Patch:
        return self.patches[i]

    @property
    def overlap_pairs(self) -> List[Tuple[int, int]]:
        pairs = set()
        for (i, j) in self._over:
            pairs.add((min(i, j), max(i, j)))
        return sorted(pairs)

    def has_overlap(self, i: int, j: int) -> bool:
        return i == j or (i, j) in self._over or (j, i) in self._over

    def coords_in(self, i: int, j: int, x) -> np.ndarray:
        """Chart-j coordinates of chart-i coordinates x."""
        x = np.asarray(x, dtype=float)
        if i == j:
            return x.copy()
        if (i, j) in self._over:
            fn = self._over[(i, j)].coords_j
            return x.copy() if fn is None else fn(x)
        if (j, i) in self._over:
            ov = self._over[(j, i)]
            if ov.coords_j is None:
                return x.copy()
            inv = ov.coords_i
            if inv is None:
                raise BundleError(f"no inverse coordinate map for overlap ({j}, {i})")
            return inv(x)
        raise BundleError(f"charts {i} and {j} do not overlap")

    def transition(self, i: int, j: int, x) -> np.ndarray:
        """g_ij evaluated at chart-i coordinates x (batched)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if i == j:
            return self.group.identity((x.shape[0],))
        if (i, j) in self._over:
            return self._over[(i, j)].gij(x)
        if (j, i) in self._over:
            xj = self.coords_in(i, j, x)
            return self.group.inv(self._over[(j, i)].gij(xj))
        raise BundleError(f"charts {i} and {j} do not overlap")

    def change_chart(self, i: int, j: int, x, g):
        """Re-express chart-i points (x, g) in chart j."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        gij = self.transition(i, j, x)
        return self.coords_in(i, j, x), self.group.inv(gij) @ np.asarray(g)

    def in_overlap(self, i: int, j: int, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        ok = self.patches[i].contains(x)
        if i != j:
            ok &= self.patches[j].contains(self.coords_in(i, j, x))
        return ok

    def sample_overlap(self, rng: np.random.Generator, size: int, *charts: int,
                       max_tries: int = 200) -> np.ndarray:
        """Chart-i coordinates (i = charts[0]) of points in the common overlap."""
        i = charts[0]
        got: List[np.ndarray] = []
        count = 0
        for _ in range(max_tries):
            cand = self.charts[i].domain.sample(rng, 4 * size, shrink=0.98)
            keep = np.ones(len(cand), dtype=bool)
            for j in charts:
                keep &= self.in_overlap(i, j, cand)
            got.append(cand[keep])
            count += int(keep.sum())
            if count >= size:
                break
        pts = np.concatenate(got)[:size] if got else np.zeros((0, self.base_dim))
        return pts

    # ---- axioms of the atlas

    def cocycle_check(self, samples: int = 200, seed: int = 0) -> dict:
        """Residuals of g_ii = e, g_ij g_ji = e and g_ij g_jk = g_ik on samples."""
        rng = np.random.default_rng(seed)
        eye = np.eye(self.group.n)
        out = {"identity": 0.0, "inverse": 0.0, "triple": 0.0, "membership": 0.0,
               "triples_checked": 0}
        n = len(self.charts)
        for i in range(n):
            x = self.charts[i].domain.sample(rng, min(samples, 20))
            out["identity"] = max(out["identity"], float(np.max(np.abs(self.transition(i, i, x) - eye))))
        for (i, j) in self.overlap_pairs:
            x = self.sample_overlap(rng, samples, i, j)
            if len(x) == 0:
                continue
            gij = self.transition(i, j, x)
            gji = self.transition(j, i, self.coords_in(i, j, x))
            out["membership"] = max(out["membership"], self.group.membership_residual(gij))
            out["inverse"] = max(out["inverse"], float(np.max(np.abs(gij @ gji - eye))))
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    if len({i, j, k}) < 3 or not (self.has_overlap(i, j) and self.has_overlap(j, k)
                                                  and self.has_overlap(i, k)):
                        continue
                    x = self.sample_overlap(rng, samples, i, j, k)
                    if len(x) == 0:
                        continue
                    out["triples_checked"] += 1
                    lhs = self.transition(i, j, x) @ self.transition(j, k, self.coords_in(i, j, x))
                    rhs = self.transition(i, k, x)
                    out["triple"] = max(out["triple"], float(np.max(np.abs(lhs - rhs))))
        out["max_residual"] = max(out["identity"], out["inverse"], out["triple"], out["membership"])
        return out


# ---------------------------------------------------------------- point-level API

def right_action(u: BundlePoint, g) -> BundlePoint:
    g = g.matrix if isinstance(g, lg.GroupElement) else np.asarray(g, dtype=complex)
    if g.shape != u.g.shape:
        raise lg.GroupMismatch("group element has the wrong size for this bundle")
    return BundlePoint(u.chart, np.asarray(u.x, float).copy(), u.g @ g)


def tangent_right_action(X: TangentVec, g, group: lg.MatrixLieGroup) -> TangentVec:
    g = g.matrix if isinstance(g, lg.GroupElement) else np.asarray(g, dtype=complex)
    if g.shape != (group.n, group.n):
        raise lg.GroupMismatch("group element has the wrong size for this bundle")
    xi = group.Ad(group.inv(g), X.xi) if group.d else np.asarray(X.xi, float)
    return TangentVec(right_action(X.point, g), np.asarray(X.xdot, float).copy(), xi)


def vertical_component(X: TangentVec) -> TangentVec:
    return TangentVec(X.point, np.zeros_like(np.asarray(X.xdot, float)), np.asarray(X.xi, float).copy())


# ---------------------------------------------------------------- construction helpers

def trivial_bundle(group: lg.MatrixLieGroup, vars: Sequence[str], domain: Domain,
                   name: str = "trivial") -> ChartedBundle:
    return ChartedBundle(group, [Chart("U", tuple(vars), domain)], name=name)


def dsl_matrix_fn(entries, group: lg.MatrixLieGroup, vars: Sequence[str]) -> MatrixFn:
    """Matrix-valued function of chart coordinates from DSL entries.

    Each entry is a string (real) or a pair [re, im] of strings.
    """
    m = group.n
    if len(entries) != m or any(len(row) != m for row in entries):
        raise BundleError(f"transition matrix must be {m}x{m}")
    comp = []
    for row in entries:
        crow = []
        for ent in row:
            if isinstance(ent, (list, tuple)):
                if len(ent) != 2:
                    raise BundleError("complex entries are [re, im] pairs")
                crow.append((Compiled(ent[0]), Compiled(ent[1])))
            else:
                crow.append((Compiled(ent), None))
        comp.append(crow)
    vars = tuple(vars)

    def fn(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        env = {v: x[:, a] for a, v in enumerate(vars)}
        out = np.zeros((x.shape[0], m, m), dtype=complex)
        for a in range(m):
            for b in range(m):
                re, im = comp[a][b]
                out[:, a, b] = re(env)
                if im is not None:
                    out[:, a, b] += 1j * np.asarray(im(env))
        return out
    return fn


def dsl_coords_fn(entries, vars: Sequence[str]) -> CoordFn:
    comp = [Compiled(e) for e in entries]
    vars = tuple(vars)

    def fn(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        env = {v: x[:, a] for a, v in enumerate(vars)}
        return np.stack([np.broadcast_to(c(env), (x.shape[0],)) for c in comp], axis=-1).astype(float)
    return fn


# ---------------------------------------------------------------- the Hopf bundle

class HopfBundle(ChartedBundle):
    """SU(2) over S^2 with structure group U(1) acting by q -> q (z, 0).

    Chart 0 (``upper``) uses the section (1, w)/|(1, w)| and misses only the
    point (0, 0, -1); chart 1 (``lower``) uses (w, 1)/|(w, 1)| and misses
    (0, 0, 1).  Here w = x + i y.  Base points, coordinate changes and the
    transition function are all computed from ``hopf_project``.
    """

    RADIUS = 3.0

    def __init__(self, samples: int = 200, seed: int = 0):
        group = lg.u1()
        charts = [Chart("upper", ("x", "y"), Domain.ball([0.0, 0.0], self.RADIUS)),
                  Chart("lower", ("x", "y"), Domain.ball([0.0, 0.0], self.RADIUS))]
        overlaps = [Overlap(0, 1, lambda x: self._clutch(0, 1, x), lambda x: self._recoord(0, 1, x)),
                    Overlap(1, 0, lambda x: self._clutch(1, 0, x), lambda x: self._recoord(1, 0, x))]
        super().__init__(group, charts, overlaps, name="hopf", samples=samples, seed=seed)

    @staticmethod
    def section(i: int, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        w = x[:, 0] + 1j * x[:, 1]
        r = np.sqrt(1.0 + np.abs(w) ** 2)
        one = np.ones_like(w)
        if i == 0:
            return lg.su2_from_entries(one / r, w / r)
        return lg.su2_from_entries(w / r, one / r)

    @staticmethod
    def chart_of_sphere(i: int, p) -> np.ndarray:
        p = np.atleast_2d(np.asarray(p, dtype=float))
        c = p[:, 0] + 1j * p[:, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            w = -c / (1.0 + p[:, 2]) if i == 0 else -c / (1.0 - p[:, 2])
        return np.stack([w.real, w.imag], axis=-1)

    def base_point(self, i: int, x) -> np.ndarray:
        return lg.hopf_project(self.section(i, x))

    def _recoord(self, i: int, j: int, x) -> np.ndarray:
        return self.chart_of_sphere(j, self.base_point(i, x))

    def _clutch(self, i: int, j: int, x) -> np.ndarray:
        # sigma_j = sigma_i (z, 0), so g_ij = z
        si = self.section(i, x)
        sj = self.section(j, self._recoord(i, j, x))
        m = np.conj(np.swapaxes(si, -1, -2)) @ sj
        return m[:, :1, :1]

    def clutching_offdiag(self, x) -> float:
        """How far sigma_0^-1 sigma_1 is from the embedded circle (should be ~0)."""
        si = self.section(0, x)
        sj = self.section(1, self._recoord(0, 1, x))
        m = np.conj(np.swapaxes(si, -1, -2)) @ sj
        return float(np.max(np.abs(m[:, 0, 1]), initial=0.0))

    def to_su2(self, i: int, x, g) -> np.ndarray:
        """The SU(2) matrix of the chart-i point (x, g)."""
        z = np.asarray(g, dtype=complex)[..., 0, 0]
        return self.section(i, x) @ lg.u1_in_su2(z)

    def from_su2(self, i: int, q):
        """Chart-i coordinates (x, g) of SU(2) points q."""
        q = np.asarray(q, dtype=complex)
        x = self.chart_of_sphere(i, lg.hopf_project(q))
        m = np.conj(np.swapaxes(self.section(i, x), -1, -2)) @ q
        return x, m[..., :1, :1]


def build_hopf(samples: int = 200, seed: int = 0) -> HopfBundle:
    return HopfBundle(samples=samples, seed=seed)


# ---------------------------------------------------------------- JSON

def bundle_from_json(obj: dict, group: lg.MatrixLieGroup) -> ChartedBundle:
    """Build a bundle from the JSON layout used in experiment files."""
    if obj.get("kind") == "hopf":
        if group.name != "U1":
            raise BundleError("the Hopf bundle has structure group U1")
        return build_hopf()
    n = int(obj["base_dim"])
    charts = []
    for c in obj["charts"]:
        vars = tuple(c.get("vars") or (["x", "y", "z", "w"][:n] if n <= 4 else [f"x{k}" for k in range(n)]))
        if len(vars) != n:
            raise BundleError(f"chart {c['name']} declares {len(vars)} variables, expected {n}")
        charts.append(Chart(c["name"], vars, domain_from_json(c["domain"], n)))
    names = [c.name for c in charts]

    def index(ref):
        if isinstance(ref, int):
            return ref
        try:
            return names.index(ref)
        except ValueError:
            raise BundleError(f"unknown chart {ref!r}") from None

    overlaps = []
    for ov in obj.get("overlaps", []):
        i, j = index(ov["i"]), index(ov["j"])
        o = Overlap(i, j, dsl_matrix_fn(ov["gij"], group, charts[i].vars))
        if "coords" in ov:
            o.coords_j = dsl_coords_fn(ov["coords"], charts[i].vars)
            if "coords_back" in ov:
                o.coords_i = dsl_coords_fn(ov["coords_back"], charts[j].vars)
        overlaps.append(o)
    return ChartedBundle(group, charts, overlaps, name=obj.get("name", "bundle"))
