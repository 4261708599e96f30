"""Connections gamma(X) = X (+) omega(X) on the trivial PBG-algebroid.

omega is stored as a matrix-valued function ``(x, g) -> (N, k, n + d)``
acting on frame coefficients of tangent vectors.  Conventions used
throughout:

* ``d omega(X, Y) = X(omega Y) - Y(omega X) - omega([X, Y])``
* ``[omega, omega](X, Y) = [omega X, omega Y]`` (no factor 1/2)
* curvature ``Omega(X, Y) = gamma[X, Y] - [gamma X, gamma Y]``, which for the
  trivial algebroid equals ``-(d omega + [omega, omega])(X, Y)``.
"""
from __future__ import annotations

from itertools import combinations
from typing import Callable, Optional, Sequence

import numpy as np

from . import liegroup as lg
from .algebroid import (BRACKET_STEP, SCALAR_STEP, Field, Section, TrivialPBGAlgebroid,
                        directional, trivial_bracket)
from .bundle import OutOfChart, TangentVec
from .expr import Compiled
from .result import CheckResult, merge

CROSS_CHECK_TOL = 1e-5


class ConnectionError_(ValueError):
    pass


class NotVanishingOnVertical(ConnectionError_):
    pass


class NotIsometablic(ConnectionError_):
    pass


class InternalInconsistency(RuntimeError):
    pass


class ConnectionForm:
    """An h-valued 1-form omega defining gamma(X) = X (+) omega(X)."""

    def __init__(self, algebroid: TrivialPBGAlgebroid, matrix: Callable, label: str = "omega",
                 values: Optional[Sequence] = None, extension: str = "literal",
                 form: Optional[Callable] = None):
        self.algebroid = algebroid
        self._matrix = matrix
        self._form = form
        self.label = label
        self.values = values
        self.extension = extension

    @property
    def patch(self):
        return self.algebroid.patch

    def matrix(self, x, g) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.asarray(self._matrix(x, g), dtype=float)
        return np.broadcast_to(out, (x.shape[0], self.algebroid.k, self.algebroid.dim))

    def omega(self, x, g, v) -> np.ndarray:
        if self._form is not None:
            x = np.atleast_2d(np.asarray(x, dtype=float))
            v = np.broadcast_to(np.asarray(v, float), (x.shape[0], self.algebroid.dim))
            return np.asarray(self._form(x, g, v), dtype=float)
        return np.einsum("nkj,nj->nk", self.matrix(x, g), np.broadcast_to(
            np.asarray(v, float), (np.atleast_2d(x).shape[0], self.algebroid.dim)))

    def field(self, v) -> Field:
        """The h-valued function u -> omega_u(v) for a constant frame vector v."""
        v = np.asarray(v, dtype=float)
        return Field(lambda x, g: self.omega(x, g, v), self.algebroid.k, f"omega({v.tolist()})")

    def gamma(self, v) -> Section:
        """gamma applied to the constant-coefficient frame field v."""
        return Section(self.algebroid, Field.constant(v), self.field(v))

    def __add__(self, other: "ConnectionForm") -> "ConnectionForm":
        return ConnectionForm(self.algebroid, lambda x, g: self.matrix(x, g) + other.matrix(x, g),
                              f"{self.label}+{other.label}")

    def __sub__(self, other: "ConnectionForm") -> "ConnectionForm":
        return ConnectionForm(self.algebroid, lambda x, g: self.matrix(x, g) - other.matrix(x, g),
                              f"{self.label}-{other.label}")

    # ---- constructors

    @staticmethod
    def from_exprs(alg: TrivialPBGAlgebroid, table, extension: str = "literal",
                   label: str = "omega") -> "ConnectionForm":
        """From a k x (n + d) table of DSL strings.

        ``extension="literal"`` reads the table at every point.  With
        ``"equivariant"`` the table gives omega along the identity section
        g = e and is carried to other fiber points by the G-action, which
        makes the result isometablic by construction:
        ``omega_(x,h)(xdot, xi) = rho_*(h^-1) W(x)(xdot, Ad(h) xi)``.
        """
        k, dim, n = alg.k, alg.dim, alg.n
        if len(table) != k or any(len(row) != dim for row in table):
            raise ConnectionError_(f"omega table must be {k} x {dim}")
        comp = [[Compiled(e) for e in row] for row in table]
        patch = alg.patch
        G = patch.group

        def raw(x, g):
            env = patch.env(x, g)
            N = x.shape[0]
            out = np.zeros((N, k, dim))
            for a in range(k):
                for b in range(dim):
                    out[:, a, b] = comp[a][b](env)
            return out

        if extension == "literal":
            matrix = raw
        elif extension == "equivariant":
            def matrix(x, g):
                g = np.asarray(g, dtype=complex)
                W = raw(x, G.identity((x.shape[0],)))
                R = alg.action.star(G.inv(g))
                if patch.d:
                    T = np.zeros((x.shape[0], dim, dim))
                    T[:, :n, :n] = np.eye(n)
                    T[:, n:, n:] = G.Ad_matrix(g)
                    W = W @ T
                return R @ W
        else:
            raise ConnectionError_(f"unknown extension {extension!r}")
        return ConnectionForm(alg, matrix, label, values=[[c.text for c in row] for row in comp],
                              extension=extension)

    @staticmethod
    def from_form(alg: TrivialPBGAlgebroid, form: Callable, label: str = "omega") -> "ConnectionForm":
        """From a function (x, g, v) -> omega(v), linear in v."""
        dim = alg.dim

        def matrix(x, g):
            N = x.shape[0]
            cols = [form(x, g, np.broadcast_to(np.eye(dim)[j], (N, dim))) for j in range(dim)]
            return np.stack(cols, axis=-1)
        return ConnectionForm(alg, matrix, label, form=form)

    def to_json(self):
        return {"omega": self.values, "extension": self.extension}


def standard_flat(alg: TrivialPBGAlgebroid) -> ConnectionForm:
    """X -> X (+) 0."""
    return ConnectionForm(alg, lambda x, g: np.zeros((x.shape[0], alg.k, alg.dim)), "0",
                          values=[["0"] * alg.dim for _ in range(alg.k)])


def apply(gamma: ConnectionForm, X: TangentVec):
    """(anchor part, h part) of gamma(X) at the point of X."""
    x = np.atleast_2d(np.asarray(X.point.x, dtype=float))
    if not np.all(gamma.patch.contains(x)):
        raise OutOfChart("point outside the chart domain")
    v = X.frame
    return v, gamma.omega(x, X.point.g[None], v)[0]


# ---------------------------------------------------------------- sampling helpers

def _sample(gamma: ConnectionForm, rng, size):
    alg = gamma.algebroid
    x, g = alg.random_points(rng, size)
    v = rng.standard_normal((size, alg.dim))
    return x, g, v


def isometablic_check(gamma: ConnectionForm, samples: int = 100, seed: int = 0,
                      tol: float = 1e-8) -> CheckResult:
    """max |omega_{ug}(TR_g X) - omega_u(X) . g| over samples."""
    rng = np.random.default_rng(seed)
    alg = gamma.algebroid
    patch = alg.patch
    x, h, v = _sample(gamma, rng, samples)
    g = patch.group.random(rng, samples)
    lhs = gamma.omega(x, h @ g, patch.tangent_right_action(v, g))
    rhs = alg.action.right(gamma.omega(x, h, v), g)
    res = float(np.max(np.linalg.norm(lhs - rhs, axis=-1), initial=0.0))
    return CheckResult("isometablic", res, tol, "gamma o TR_g = R_g o gamma", {"samples": samples})


# ---------------------------------------------------------------- curvature

def curvature(gamma: ConnectionForm, X, Y, x, g, cross_check: bool = False,
              step: Optional[float] = None) -> np.ndarray:
    """Omega(X, Y) = gamma[X, Y] - [gamma X, gamma Y] for constant frame fields.

    Computed through the algebroid bracket.  With ``cross_check`` the closed
    form -(d omega + [omega, omega]) is evaluated too and a disagreement
    above 1e-5 raises :class:`InternalInconsistency`.
    """
    alg = gamma.algebroid
    x = np.atleast_2d(np.asarray(x, dtype=float))
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    XY = alg.patch.frame_bracket(X, Y)
    _, V = trivial_bracket(gamma.gamma(X), gamma.gamma(Y), step=step)(x, g)
    Om = gamma.omega(x, g, XY) - V
    if cross_check:
        other = curvature_closed_form(gamma, X, Y, x, g)
        gap = float(np.max(np.abs(other - Om), initial=0.0))
        if gap > CROSS_CHECK_TOL:
            raise InternalInconsistency(f"curvature routes disagree by {gap:.3e}")
    return Om


def curvature_closed_form(gamma: ConnectionForm, X, Y, x, g, step: float = SCALAR_STEP) -> np.ndarray:
    """-(d omega(X, Y) + [omega X, omega Y]) from derivatives of the omega matrix."""
    alg = gamma.algebroid
    patch = alg.patch
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    N = np.atleast_2d(x).shape[0]
    Xb = np.broadcast_to(X, (N, alg.dim))
    Yb = np.broadcast_to(Y, (N, alg.dim))
    dM_X = directional(patch, gamma.matrix, x, g, Xb, step)
    dM_Y = directional(patch, gamma.matrix, x, g, Yb, step)
    M = gamma.matrix(x, g)
    XY = patch.frame_bracket(X, Y)
    domega = (np.einsum("nkj,nj->nk", dM_X, Yb) - np.einsum("nkj,nj->nk", dM_Y, Xb)
              - np.einsum("nkj,j->nk", M, XY))
    wX = np.einsum("nkj,nj->nk", M, Xb)
    wY = np.einsum("nkj,nj->nk", M, Yb)
    return -(domega + alg.fiber.bracket(wX, wY))


def curvature_tensor(gamma: ConnectionForm, x, g) -> np.ndarray:
    """Omega(e_a, e_b) for all frame pairs, shape (N, dim, dim, k)."""
    alg = gamma.algebroid
    dim = alg.dim
    N = np.atleast_2d(x).shape[0]
    out = np.zeros((N, dim, dim, alg.k))
    eye = np.eye(dim)
    for a, b in combinations(range(dim), 2):
        Om = curvature(gamma, eye[a], eye[b], x, g)
        out[:, a, b] = Om
        out[:, b, a] = -Om
    return out


def curvature_at(gamma: ConnectionForm, x, g, X, Y) -> np.ndarray:
    """Omega_u(X_u, Y_u) for tangent vectors given pointwise (tensorial)."""
    T = curvature_tensor(gamma, x, g)
    return np.einsum("na,nb,nabk->nk", X, Y, T)


def curvature_checks(gamma: ConnectionForm, samples: int = 20, seed: int = 0,
                     tol: float = 1e-8) -> CheckResult:
    """Antisymmetry, bilinearity and agreement of the two curvature routes."""
    rng = np.random.default_rng(seed)
    alg = gamma.algebroid
    x, g, X = _sample(gamma, rng, samples)
    Y = rng.standard_normal(X.shape)
    Z = rng.standard_normal(X.shape)
    T = curvature_tensor(gamma, x, g)
    anti = float(np.max(np.abs(T + np.swapaxes(T, 1, 2)), initial=0.0))
    a, b = rng.standard_normal(2)
    lin = float(np.max(np.abs(curvature_at(gamma, x, g, a * X + b * Z, Y)
                              - a * curvature_at(gamma, x, g, X, Y) - b * curvature_at(gamma, x, g, Z, Y)),
                       initial=0.0))
    eye = np.eye(alg.dim)
    gap = 0.0
    for i, j in combinations(range(alg.dim), 2):
        cf = curvature_closed_form(gamma, eye[i], eye[j], x, g)
        gap = max(gap, float(np.max(np.abs(cf - T[:, i, j]), initial=0.0)))
    return merge("curvature-consistency", {"antisymmetry": anti, "bilinearity": lin,
                                           "closed-form-gap": gap * tol / CROSS_CHECK_TOL},
                 tol, "Omega antisymmetric, bilinear; bracket and closed-form routes agree",
                 closed_form_gap=gap)


def curvature_equivariance_check(gamma: ConnectionForm, samples: int = 100, seed: int = 0,
                                 tol: float = 1e-5) -> CheckResult:
    """Omega_{ug}(TR_g X, TR_g Y) = Omega_u(X, Y) . g."""
    rng = np.random.default_rng(seed)
    alg = gamma.algebroid
    patch = alg.patch
    x, h, X = _sample(gamma, rng, samples)
    Y = rng.standard_normal(X.shape)
    g = patch.group.random(rng, samples)
    lhs = curvature_at(gamma, x, h @ g, patch.tangent_right_action(X, g), patch.tangent_right_action(Y, g))
    rhs = alg.action.right(curvature_at(gamma, x, h, X, Y), g)
    res = float(np.max(np.linalg.norm(lhs - rhs, axis=-1), initial=0.0))
    return CheckResult("curvature-equivariance", res, tol, "Omega o (TR_g x TR_g) = R_g o Omega",
                       {"samples": samples})


# ---------------------------------------------------------------- back and adjoint connections

class BackConnection:
    """The projection A -> L with iota o w + gamma o anchor = id: X (+) V -> V - omega(X)."""

    def __init__(self, gamma: ConnectionForm):
        self.gamma = gamma

    def __call__(self, x, g, X, V) -> np.ndarray:
        return np.asarray(V, float) - self.gamma.omega(x, g, X)

    def check(self, samples: int = 50, seed: int = 0, tol: float = 1e-10) -> CheckResult:
        rng = np.random.default_rng(seed)
        alg = self.gamma.algebroid
        x, g, X = _sample(self.gamma, rng, samples)
        V = rng.standard_normal((samples, alg.k))
        w = self(x, g, X, V)
        # iota(w(a)) + gamma(anchor(a)) = a
        recon_V = w + self.gamma.omega(x, g, X)
        r1 = float(np.max(np.abs(recon_V - V), initial=0.0))
        # w(iota V) = V and w(gamma X) = 0
        r2 = float(np.max(np.abs(self(x, g, np.zeros_like(X), V) - V), initial=0.0))
        r3 = float(np.max(np.abs(self(x, g, X, self.gamma.omega(x, g, X))), initial=0.0))
        return merge("back-connection", {"reconstruction": r1, "on-vertical": r2, "on-image": r3}, tol,
                     "iota o w + gamma o q = id and w o iota = id")


def back_connection(gamma: ConnectionForm) -> BackConnection:
    return BackConnection(gamma)


class AdjointConnection:
    """nabla_X V = [gamma X, iota V] = X(V) + [omega(X), V]."""

    def __init__(self, gamma: ConnectionForm, step: float = SCALAR_STEP):
        self.gamma = gamma
        self.step = step

    def operator(self, x, g, X) -> np.ndarray:
        """Zeroth-order part ad(omega(X)) as a k x k matrix."""
        alg = self.gamma.algebroid
        return alg.fiber.ad_matrix(self.gamma.omega(x, g, X))

    def __call__(self, X, V: Callable, x, g, step: Optional[float] = None) -> np.ndarray:
        alg = self.gamma.algebroid
        x = np.atleast_2d(np.asarray(x, dtype=float))
        X = np.broadcast_to(np.asarray(X, float), (x.shape[0], alg.dim))
        dV = directional(alg.patch, V, x, g, X, self.step if step is None else step)
        return dV + alg.fiber.bracket(self.gamma.omega(x, g, X), V(x, g))


def adjoint_apply(gamma: ConnectionForm, X, V: Callable, x, g) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if not np.all(gamma.patch.contains(x)):
        raise OutOfChart("point outside the chart domain")
    return AdjointConnection(gamma)(X, V, x, g)


def _random_h_field(alg: TrivialPBGAlgebroid, rng) -> Field:
    from .algebroid import random_polynomial_exprs
    vars = list(alg.patch.vars) + (alg.patch.group.fiber_var_names()[:4] if alg.patch.d else [])
    return Field.from_exprs(alg.patch, random_polynomial_exprs(vars, rng, alg.k))


def adjoint_equivariance_check(gamma: ConnectionForm, samples: int = 50, seed: int = 0,
                               tol: float = 1e-5) -> CheckResult:
    """(nabla_X V) . g = nabla_{TR_g X}(R_g V) with (R_g V)(u) = V(u g^-1) . g."""
    rng = np.random.default_rng(seed)
    alg = gamma.algebroid
    patch = alg.patch
    G = patch.group
    nabla = AdjointConnection(gamma)
    worst = 0.0
    batches = max(1, samples // 10)
    for _ in range(batches):
        V = _random_h_field(alg, rng)
        g = G.random(rng)
        x, h, X = _sample(gamma, rng, 10)
        gi = G.inv(g)
        RV = Field(lambda xx, hh: alg.action.right(V(xx, np.asarray(hh) @ gi), np.broadcast_to(g, np.shape(hh))),
                   alg.k)
        lhs = alg.action.right(nabla(X, V, x, h), np.broadcast_to(g, h.shape))
        rhs = nabla(patch.tangent_right_action(X, g), RV, x, h @ g)
        worst = max(worst, float(np.max(np.linalg.norm(lhs - rhs, axis=-1), initial=0.0)))
    return CheckResult("adjoint-equivariance", worst, tol, "R(nabla_X V) = nabla_{TR_g X}(R V)",
                       {"samples": batches * 10})


def derivation_check(gamma: ConnectionForm, samples: int = 50, seed: int = 0,
                     tol: float = 1e-5) -> CheckResult:
    """nabla_X [V, W] = [nabla_X V, W] + [V, nabla_X W]."""
    rng = np.random.default_rng(seed)
    alg = gamma.algebroid
    H = alg.fiber
    nabla = AdjointConnection(gamma)
    worst = 0.0
    for _ in range(max(1, samples // 10)):
        V, W = _random_h_field(alg, rng), _random_h_field(alg, rng)
        VW = Field(lambda xx, gg: H.bracket(V(xx, gg), W(xx, gg)), alg.k)
        x, g, X = _sample(gamma, rng, 10)
        lhs = nabla(X, VW, x, g)
        rhs = H.bracket(nabla(X, V, x, g), W(x, g)) + H.bracket(V(x, g), nabla(X, W, x, g))
        worst = max(worst, float(np.max(np.abs(lhs - rhs), initial=0.0)))
    return CheckResult("adjoint-derivation", worst, tol, "nabla_X [V, W] = [nabla V, W] + [V, nabla W]")


def bianchi_check(gamma: ConnectionForm, samples: int = 100, seed: int = 0, tol: float = 1e-4,
                  step: float = BRACKET_STEP) -> CheckResult:
    """Cyclic sum of nabla_X(Omega(Y, Z)) - Omega([X, Y], Z) for constant frame fields."""
    rng = np.random.default_rng(seed)
    alg = gamma.algebroid
    patch = alg.patch
    nabla = AdjointConnection(gamma, step=step)
    worst = 0.0
    for _ in range(samples):
        X, Y, Z = rng.standard_normal((3, alg.dim))
        x, g = alg.random_points(rng, 1)
        total = np.zeros((1, alg.k))
        for A, B, C in ((X, Y, Z), (Y, Z, X), (Z, X, Y)):
            OmBC = Field(lambda xx, gg, B=B, C=C: curvature(gamma, B, C, xx, gg), alg.k)
            total += nabla(A, OmBC, x, g)
            total -= curvature(gamma, patch.frame_bracket(A, B), C, x, g)
        worst = max(worst, float(np.max(np.abs(total))))
    return CheckResult("bianchi", worst, tol, "sum_cyc nabla_X Omega(Y, Z) - Omega([X, Y], Z) = 0",
                       {"samples": samples})


# ---------------------------------------------------------------- quotient correspondence

def principal_connection_check(delta: ConnectionForm, samples: int = 50, seed: int = 0) -> float:
    """Residual of delta(vertical xi) = xi and delta(TR_g X) = Ad(g^-1) delta(X)."""
    rng = np.random.default_rng(seed)
    alg = delta.algebroid
    patch = alg.patch
    G = patch.group
    if alg.k != G.d:
        raise ConnectionError_("a principal connection is g-valued")
    x, h, v = _sample(delta, rng, samples)
    vert = patch.vertical_component(v)
    r1 = float(np.max(np.abs(delta.omega(x, h, vert) - vert[:, patch.n:]), initial=0.0))
    g = G.random(rng, samples)
    lhs = delta.omega(x, h @ g, patch.tangent_right_action(v, g))
    rhs = G.Ad(G.inv(g), delta.omega(x, h, v))
    r2 = float(np.max(np.abs(lhs - rhs), initial=0.0))
    return max(r1, r2)


def horizontal_lift(delta: ConnectionForm, x, g, xdot) -> np.ndarray:
    """Frame vector over xdot at (x, g) annihilated by delta."""
    patch = delta.patch
    n = patch.n
    M = delta.matrix(x, g)
    xdot = np.atleast_2d(xdot)
    xi = -np.linalg.solve(M[:, :, n:], np.einsum("nkj,nj->nk", M[:, :, :n], xdot)[..., None])[..., 0]
    return np.concatenate([xdot, xi], axis=-1)


class QuotientSection:
    """gamma~(xdot) over a base point, realised as an equivariant section.

    Evaluating at any point u over x gives omega_u of the delta-horizontal
    lift of xdot.
    """

    def __init__(self, gamma: ConnectionForm, delta: ConnectionForm):
        self.gamma = gamma
        self.delta = delta

    def __call__(self, x, g, xdot) -> np.ndarray:
        return self.gamma.omega(x, g, horizontal_lift(self.delta, x, g, xdot))

    def reconstruct(self, x, g, v) -> np.ndarray:
        """h-part of gamma'(X) = gamma~(Tp X) evaluated at u."""
        return self(x, g, np.asarray(v)[:, : self.gamma.patch.n])


def quotient_roundtrip(gamma: ConnectionForm, deltas: Sequence[ConnectionForm], samples: int = 100,
                       seed: int = 0, tol: float = 1e-6) -> CheckResult:
    """Round trip gamma -> gamma~ -> gamma' and independence of the principal connection."""
    if not deltas:
        raise ConnectionError_("need at least one principal connection")
    rng = np.random.default_rng(seed)
    alg = gamma.algebroid
    patch = alg.patch
    x, h, v = _sample(gamma, rng, samples)
    vert = float(np.max(np.abs(gamma.omega(x, h, patch.vertical_component(v))), initial=0.0))
    if vert > 1e-8:
        raise NotVanishingOnVertical(f"omega on vertical vectors reaches {vert:.3e}")
    iso = isometablic_check(gamma, samples=min(samples, 50), seed=seed + 1)
    if not iso.passed:
        raise NotIsometablic(f"isometablic residual {iso.residual:.3e}")
    principal = max(principal_connection_check(d, seed=seed + 2) for d in deltas)
    if principal > 1e-8:
        raise ConnectionError_(f"delta is not a principal connection (residual {principal:.3e})")
    target = gamma.omega(x, h, v)
    roundtrip = 0.0
    outs = []
    equiv = 0.0
    G = patch.group
    for d in deltas:
        q = QuotientSection(gamma, d)
        got = q.reconstruct(x, h, v)
        outs.append(got)
        roundtrip = max(roundtrip, float(np.max(np.abs(got - target), initial=0.0)))
        g = G.random(rng, samples)
        equiv = max(equiv, float(np.max(np.abs(q(x, h @ g, v[:, : patch.n]) - alg.action.right(
            q(x, h, v[:, : patch.n]), g)), initial=0.0)))
    indep = max((float(np.max(np.abs(o - outs[0]), initial=0.0)) for o in outs[1:]), default=0.0)
    return merge("quotient-roundtrip", {"roundtrip": roundtrip, "delta-independence": indep,
                                        "section-equivariance": equiv}, tol,
                 "connections of A/G <-> isometablic connections vanishing on vertical vectors",
                 deltas=len(deltas))


# ---------------------------------------------------------------- induced Hom-connections

def hom_connection(phi: Callable, nabla_in: Optional[AdjointConnection], nabla_out: Optional[AdjointConnection],
                   X, x, g, arity: int = 1, patch=None, step: float = SCALAR_STEP) -> np.ndarray:
    """Induced derivative of a multilinear bundle map phi along X.

    ``phi(x, g)`` has shape (N, out, k, ..., k) with ``arity`` input slots,
    or (N, k, ..., k) when ``nabla_out`` is None and the target is the
    trivial line bundle.  Returns
    ``X'(phi(mu...)) - sum_i phi(..., X(mu_i), ...)`` as a tensor of the same
    shape, where X acts on inputs through ``nabla_in`` and on outputs
    through ``nabla_out`` (None on either side means the flat derivative).
    """
    if patch is None:
        ref = nabla_in or nabla_out
        if ref is None:
            raise ConnectionError_("need a patch when both connections are flat")
        patch = ref.gamma.patch
    x = np.atleast_2d(np.asarray(x, dtype=float))
    N = x.shape[0]
    X = np.broadcast_to(np.asarray(X, float), (N, patch.dim))
    P = np.asarray(phi(x, g), dtype=float)
    dP = directional(patch, lambda xx, gg: np.asarray(phi(xx, gg), float), x, g, X, step)
    out = dP.copy()
    has_out = nabla_out is not None or P.ndim == arity + 2
    if nabla_out is not None:
        B = nabla_out.operator(x, g, X)
        out += np.einsum("nab,nb...->na...", B, P)
    if nabla_in is not None:
        B = nabla_in.operator(x, g, X)
        first = 2 if has_out else 1
        for slot in range(arity):
            ax = first + slot
            moved = np.moveaxis(P, ax, -1)
            contrib = np.einsum("n...b,nba->n...a", moved, B)
            out -= np.moveaxis(contrib, -1, ax)
    return out


def dsl_tensor_field(patch, entries) -> Callable:
    """Tensor-valued function from a nested list of DSL strings."""
    arr = np.asarray(entries, dtype=object)
    comp = np.vectorize(lambda e: Compiled(e), otypes=[object])(arr)

    def fn(x, g):
        env = patch.env(x, g)
        N = np.atleast_2d(x).shape[0]
        out = np.zeros((N,) + arr.shape)
        for idx in np.ndindex(arr.shape):
            out[(slice(None),) + idx] = comp[idx](env)
        return out
    return fn
