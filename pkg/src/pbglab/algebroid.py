"""The trivial PBG-algebroid TP (+) (P x h) over one chart, and P x| g.

A section ``X (+) V`` pairs a vector field ``X`` (frame coefficients over
``d/dx_a`` and the left-invariant fields ``L_k``) with an h-valued function
``V``.  Brackets are evaluated pointwise by central differences along the
flow of the other section, so the result of a bracket is again a section
and can be bracketed further.
"""
from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from . import liegroup as lg
from .action import FiberAction
from .bundle import OutOfChart, Patch
from .expr import Compiled
from .result import CheckResult, merge

BRACKET_STEP = 1e-4
SCALAR_STEP = 1e-5


class AlgebroidMismatch(ValueError):
    pass


class Field:
    """Array-valued function on the chart, ``(x, g) -> (N, width)``."""

    def __init__(self, fn: Callable, width: int, label: str = ""):
        self.fn = fn
        self.width = width
        self.label = label

    def __call__(self, x, g) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.asarray(self.fn(x, g), dtype=float)
        return np.broadcast_to(out, (x.shape[0], self.width))

    @staticmethod
    def from_exprs(patch: Patch, exprs: Sequence, label: str = "") -> "Field":
        comp = [Compiled(e) for e in exprs]

        def fn(x, g):
            env = patch.env(x, g)
            n = x.shape[0]
            return np.stack([np.broadcast_to(np.asarray(c(env), float), (n,)) for c in comp], axis=-1) \
                if comp else np.zeros((n, 0))
        f = Field(fn, len(comp), label or "[" + ", ".join(str(e) for e in exprs) + "]")
        f.exprs = [c.text for c in comp]
        return f

    @staticmethod
    def constant(values, label: str = "") -> "Field":
        v = np.asarray(values, dtype=float)
        return Field(lambda x, g: np.broadcast_to(v, (x.shape[0], v.size)), v.size, label or str(v.tolist()))

    def __add__(self, other: "Field") -> "Field":
        return Field(lambda x, g: self(x, g) + other(x, g), self.width, f"({self.label}+{other.label})")

    def __sub__(self, other: "Field") -> "Field":
        return Field(lambda x, g: self(x, g) - other(x, g), self.width, f"({self.label}-{other.label})")

    def times(self, scalar: "Field") -> "Field":
        return Field(lambda x, g: scalar(x, g)[:, :1] * self(x, g), self.width, f"{scalar.label}*{self.label}")


def directional(patch: Patch, f: Callable, x, g, v, h: float = SCALAR_STEP):
    """Derivative of f along the frame vector v at (x, g), central differences.

    ``f`` may return an array or a tuple of arrays.
    """
    xp, gp = patch.flow(x, g, v, h)
    xm, gm = patch.flow(x, g, v, -h)
    fp, fm = f(xp, gp), f(xm, gm)
    if isinstance(fp, tuple):
        return tuple((a - b) / (2.0 * h) for a, b in zip(fp, fm))
    return (fp - fm) / (2.0 * h)


class TrivialPBGAlgebroid:
    """TP (+) (P x h) over one chart with G acting on h through ``action``."""

    def __init__(self, patch: Patch, action: FiberAction, step: float = BRACKET_STEP):
        if action.G.name != patch.group.name:
            raise lg.GroupMismatch("the action must be by the structure group of the bundle")
        self.patch = patch
        self.action = action
        self.fiber = action.H
        self.step = step

    @property
    def n(self) -> int:
        return self.patch.n

    @property
    def dim(self) -> int:
        return self.patch.dim

    @property
    def k(self) -> int:
        return self.fiber.d

    def section(self, X, V, label: str = "") -> "Section":
        return Section(self, _as_field(self.patch, X, self.dim), _as_field(self.patch, V, self.k), label)

    def zero(self) -> "Section":
        return self.section(np.zeros(self.dim), np.zeros(self.k), "0")

    def random_points(self, rng, size):
        return self.patch.random_points(rng, size)


def _as_field(patch: Patch, obj, width: int) -> Field:
    if isinstance(obj, Field):
        f = obj
    elif isinstance(obj, (list, tuple)) and obj and isinstance(obj[0], str):
        f = Field.from_exprs(patch, obj)
    else:
        f = Field.constant(np.asarray(obj, dtype=float).reshape(-1))
    if f.width != width:
        raise AlgebroidMismatch(f"component has width {f.width}, expected {width}")
    return f


class Section:
    """A section X (+) V of the trivial algebroid."""

    def __init__(self, algebroid: TrivialPBGAlgebroid, X: Field, V: Field, label: str = ""):
        self.algebroid = algebroid
        self.X = X
        self.V = V
        self.label = label or f"{X.label} + {V.label}"

    def __call__(self, x, g):
        return self.X(x, g), self.V(x, g)

    def __add__(self, other: "Section") -> "Section":
        _same(self, other)
        return Section(self.algebroid, self.X + other.X, self.V + other.V)

    def __sub__(self, other: "Section") -> "Section":
        _same(self, other)
        return Section(self.algebroid, self.X - other.X, self.V - other.V)

    def times(self, f: Field) -> "Section":
        return Section(self.algebroid, self.X.times(f), self.V.times(f), f"{f.label}*({self.label})")

    def to_json(self) -> dict:
        return {"X": getattr(self.X, "exprs", None), "V": getattr(self.V, "exprs", None)}


def _same(a: Section, b: Section) -> None:
    if a.algebroid is not b.algebroid:
        raise AlgebroidMismatch("sections belong to different algebroids")


def section_from_json(alg: TrivialPBGAlgebroid, obj: dict) -> Section:
    return alg.section(Field.from_exprs(alg.patch, obj["X"]), Field.from_exprs(alg.patch, obj["V"]))


# ---------------------------------------------------------------- operations

def anchor(s: Section, x, g) -> np.ndarray:
    """Frame coefficients of the vector-field part at the given points."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if not np.all(s.algebroid.patch.contains(x)):
        raise OutOfChart("point outside the chart domain")
    return s.X(x, g)


class _FusedSection(Section):
    """Section whose two parts come from one evaluation (avoids double work)."""

    def __init__(self, alg: TrivialPBGAlgebroid, both: Callable, label: str):
        self._both = both
        super().__init__(alg, Field(lambda x, g: self(x, g)[0], alg.dim, "X"),
                         Field(lambda x, g: self(x, g)[1], alg.k, "V"), label)

    def __call__(self, x, g):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self._both(x, g)


def trivial_bracket(s1: Section, s2: Section, step: Optional[float] = None,
                    corrupt: bool = False) -> Section:
    """[X (+) V, Y (+) W] = [X, Y] (+) {X(W) - Y(V) + [V, W]}.

    ``corrupt`` replaces -Y(V) by +Y(V); used only as a negative control.
    """
    _same(s1, s2)
    alg = s1.algebroid
    patch = alg.patch
    h = alg.step if step is None else step
    sign = 1.0 if corrupt else -1.0

    def both(x, g):
        X1, V1 = s1(x, g)
        X2, V2 = s2(x, g)
        dX2, dV2 = directional(patch, s2, x, g, X1, h)
        dX1, dV1 = directional(patch, s1, x, g, X2, h)
        X = dX2 - dX1 + patch.frame_bracket(X1, X2)
        V = dV2 + sign * dV1 + alg.fiber.bracket(V1, V2)
        return X, V

    return _FusedSection(alg, both, f"[{s1.label}, {s2.label}]")


def act_on_section(s: Section, g) -> Section:
    """(R_g s)_u = TR_g X_{u g^-1} (+) V_{u g^-1} . g."""
    alg = s.algebroid
    G = alg.patch.group
    g = g.matrix if isinstance(g, lg.GroupElement) else np.asarray(g, dtype=complex)
    if g.shape != (G.n, G.n):
        raise lg.GroupMismatch("group element has the wrong size")
    ginv = G.inv(g)

    def both(x, h):
        X, V = s(x, np.asarray(h) @ ginv)
        return alg.patch.tangent_right_action(X, g), alg.action.right(V, np.broadcast_to(g, np.shape(h)))

    return _FusedSection(alg, both, f"R[{s.label}]")


def action_bracket(patch: Patch, V: Callable, W: Callable, step: float = BRACKET_STEP) -> Callable:
    """Bracket of g-valued functions on P x| g:  V+(W) - W+(V) + [V, W].

    The fundamental field of V at (x, g) is (0, V(x, g)) in the frame, since
    the right action moves the fiber along g exp(t V).
    """
    G = patch.group

    def fundamental(F, x, g):
        v = np.zeros((np.atleast_2d(x).shape[0], patch.dim))
        v[:, patch.n:] = F(x, g)
        return v

    def bracket(x, g):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        Vv, Wv = V(x, g), W(x, g)
        dW = directional(patch, W, x, g, fundamental(V, x, g), step)
        dV = directional(patch, V, x, g, fundamental(W, x, g), step)
        return dW - dV + G.bracket(Vv, Wv)
    return bracket


# ---------------------------------------------------------------- random sections

def random_polynomial_exprs(vars: Sequence[str], rng: np.random.Generator, count: int,
                            degree: int = 2, terms: int = 3) -> list:
    """Random polynomials (as DSL text) in ``vars`` with small coefficients."""
    out = []
    for _ in range(count):
        parts = [f"{rng.uniform(-1, 1):.3f}"]
        for _ in range(terms):
            deg = int(rng.integers(1, degree + 1))
            mono = "*".join(rng.choice(list(vars), size=deg))
            parts.append(f"{rng.uniform(-1, 1):.3f}*{mono}")
        out.append(" + ".join(parts).replace("+ -", "- "))
    return out


def random_section(alg: TrivialPBGAlgebroid, rng: np.random.Generator, degree: int = 2,
                   fiber_vars: bool = True) -> Section:
    vars = list(alg.patch.vars)
    if fiber_vars and alg.patch.d:
        vars += [v for v in alg.patch.group.fiber_var_names()[:4]]
    X = Field.from_exprs(alg.patch, random_polynomial_exprs(vars, rng, alg.dim, degree))
    V = Field.from_exprs(alg.patch, random_polynomial_exprs(vars, rng, alg.k, degree))
    return Section(alg, X, V)


# ---------------------------------------------------------------- law checks

def _norm(X, V) -> np.ndarray:
    return np.sqrt(np.sum(X ** 2, axis=-1) + np.sum(V ** 2, axis=-1))


def jacobi_check(alg: TrivialPBGAlgebroid, triples: int = 20, seed: int = 0,
                 sections: Optional[Sequence[Section]] = None, points: int = 4,
                 corrupt: bool = False, tol: float = 1e-5) -> CheckResult:
    """Max over sampled triples and points of |sum_cyc [s1, [s2, s3]]|."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t in range(triples):
        if sections is None:
            s1, s2, s3 = (random_section(alg, rng) for _ in range(3))
        else:
            s1, s2, s3 = (sections[(3 * t + k) % len(sections)] for k in range(3))
        x, g = alg.random_points(rng, points)
        br = lambda a, b: trivial_bracket(a, b, corrupt=corrupt)
        total = [0.0, 0.0]
        for a, b, c in ((s1, s2, s3), (s2, s3, s1), (s3, s1, s2)):
            X, V = br(a, br(b, c))(x, g)
            total[0] = total[0] + X
            total[1] = total[1] + V
        worst = max(worst, float(np.max(_norm(*total))))
    return CheckResult("jacobi", worst, tol, "sum_cyc [s1, [s2, s3]] = 0",
                       {"triples": triples, "points": points})


def leibniz_check(alg: TrivialPBGAlgebroid, samples: int = 20, seed: int = 0,
                  points: int = 4, tol: float = 1e-5) -> CheckResult:
    """[s1, f s2] = f [s1, s2] + anchor(s1)(f) s2."""
    rng = np.random.default_rng(seed)
    patch = alg.patch
    worst = 0.0
    for _ in range(samples):
        s1, s2 = random_section(alg, rng), random_section(alg, rng)
        f = Field.from_exprs(patch, random_polynomial_exprs(list(patch.vars), rng, 1))
        x, g = alg.random_points(rng, points)
        X, V = trivial_bracket(s1, s2.times(f))(x, g)
        bX, bV = trivial_bracket(s1, s2)(x, g)
        fx = f(x, g)[:, :1]
        Xf = directional(patch, f, x, g, s1.X(x, g), SCALAR_STEP)[:, :1]
        X2, V2 = s2(x, g)
        worst = max(worst, float(np.max(_norm(X - fx * bX - Xf * X2, V - fx * bV - Xf * V2))))
    return CheckResult("leibniz", worst, tol, "[s1, f s2] = f [s1, s2] + q(s1)(f) s2",
                       {"samples": samples})


def anchor_morphism_check(alg: TrivialPBGAlgebroid, samples: int = 20, seed: int = 0,
                          points: int = 4, tol: float = 1e-5) -> CheckResult:
    """q([s1, s2]) acts on test functions as X1 X2 - X2 X1."""
    rng = np.random.default_rng(seed)
    patch = alg.patch
    vars = list(patch.vars) + (patch.group.fiber_var_names()[:4] if patch.d else [])
    h = alg.step
    worst = 0.0
    for _ in range(samples):
        s1, s2 = random_section(alg, rng), random_section(alg, rng)
        phi = Field.from_exprs(patch, random_polynomial_exprs(vars, rng, 1, degree=3))
        x, g = alg.random_points(rng, points)

        def d_along(sec):
            return lambda xx, gg: directional(patch, phi, xx, gg, sec.X(xx, gg), h)
        lhs = directional(patch, phi, x, g, trivial_bracket(s1, s2)(x, g)[0], h)
        rhs = directional(patch, d_along(s2), x, g, s1.X(x, g), h) - \
            directional(patch, d_along(s1), x, g, s2.X(x, g), h)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return CheckResult("anchor-morphism", worst, tol, "q[s1, s2] = [q s1, q s2]", {"samples": samples})


def bracket_equivariance_check(alg: TrivialPBGAlgebroid, samples: int = 10, seed: int = 0,
                               points: int = 4, tol: float = 1e-6) -> CheckResult:
    """R_g [s1, s2] = [R_g s1, R_g s2] at sampled points."""
    rng = np.random.default_rng(seed)
    G = alg.patch.group
    worst = 0.0
    for _ in range(samples):
        s1, s2 = random_section(alg, rng), random_section(alg, rng)
        g = G.random(rng)
        x, h = alg.random_points(rng, points)
        X1, V1 = act_on_section(trivial_bracket(s1, s2), g)(x, h)
        X2, V2 = trivial_bracket(act_on_section(s1, g), act_on_section(s2, g))(x, h)
        worst = max(worst, float(np.max(_norm(X1 - X2, V1 - V2))))
    return CheckResult("bracket-equivariance", worst, tol, "R_g [s1, s2] = [R_g s1, R_g s2]",
                       {"samples": samples})


def algebroid_laws(alg: TrivialPBGAlgebroid, sections: int = 50, seed: int = 0,
                   tol: float = 1e-5) -> CheckResult:
    """Jacobi, Leibniz and anchor-morphism over ``sections`` random sections."""
    rng = np.random.default_rng(seed)
    pool = [random_section(alg, rng) for _ in range(sections)]
    triples = max(1, sections // 3)
    j = jacobi_check(alg, triples=triples, seed=seed + 1, sections=pool)
    l = leibniz_check(alg, samples=triples, seed=seed + 2)
    a = anchor_morphism_check(alg, samples=triples, seed=seed + 3)
    return merge("algebroid-laws", {"jacobi": j.residual, "leibniz": l.residual,
                                    "anchor-morphism": a.residual}, tol,
                 "Jacobi, Leibniz and anchor morphism for the trivial bracket",
                 sections=sections)
