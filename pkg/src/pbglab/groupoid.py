"""The trivial PBG-groupoid P x H x P, the gauge/action isomorphism, frame
groupoid actions and equivariant local sections built from flat lifts.

Arrows are triples (v, h, u) from u to v.  Composition is
``(w, h2, v)(v, h1, u) = (w, h2 h1, u)`` and G acts on the right by
``(v, h, u) . g = (v g, rho(g^-1)(h), u g)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from . import liegroup as lg
from .action import FiberAction
from .bundle import BundlePoint, ChartedBundle
from .connection import ConnectionForm
from .holonomy import hat, segment
from .result import CheckResult, merge


class GroupoidError(ValueError):
    pass


class NotComposable(GroupoidError):
    pass


class NotAMorphism(GroupoidError):
    pass


class DimensionMismatch(GroupoidError):
    pass


@dataclass(frozen=True)
class GroupoidArrow:
    target: BundlePoint
    label: np.ndarray
    source: BundlePoint


def _same_point(bundle: Optional[ChartedBundle], a: BundlePoint, b: BundlePoint, tol: float = 1e-9) -> bool:
    if a.chart != b.chart:
        if bundle is None:
            return False
        x, g = bundle.change_chart(b.chart, a.chart, b.x, b.g[None])
        b = BundlePoint(a.chart, x[0], g[0])
    return (np.max(np.abs(np.asarray(a.x) - np.asarray(b.x)), initial=0.0) < tol
            and np.max(np.abs(a.g - b.g)) < tol)


class TrivialPBGGroupoid:
    """P x H x P with G acting on H through ``action``."""

    def __init__(self, bundle: ChartedBundle, action: FiberAction):
        if action.G.name != bundle.group.name:
            raise lg.GroupMismatch("the action must be by the structure group of the bundle")
        self.bundle = bundle
        self.action = action
        self.G = bundle.group
        self.H = action.H

    # ---- point-level operations
    def identity(self, u: BundlePoint) -> GroupoidArrow:
        return GroupoidArrow(u, self.H.identity(), u)

    def multiply(self, a: GroupoidArrow, b: GroupoidArrow) -> GroupoidArrow:
        """a b, defined when the source of a is the target of b."""
        if not _same_point(self.bundle, a.source, b.target):
            raise NotComposable("source of the first arrow is not the target of the second")
        return GroupoidArrow(a.target, a.label @ b.label, b.source)

    def inverse(self, a: GroupoidArrow) -> GroupoidArrow:
        return GroupoidArrow(a.source, self.H.inv(a.label), a.target)

    def act(self, a: GroupoidArrow, g) -> GroupoidArrow:
        g = np.asarray(g, dtype=complex)
        move = lambda p: BundlePoint(p.chart, np.asarray(p.x, float).copy(), p.g @ g)
        return GroupoidArrow(move(a.target), self.action.right_group(a.label, g), move(a.source))

    # ---- batched label operations used by the checks
    def act_labels(self, h, g) -> np.ndarray:
        return self.action.right_group(h, g)


def pbg_axioms_check(gpd: TrivialPBGGroupoid, samples: int = 100, seed: int = 0,
                     tol: float = 1e-10) -> CheckResult:
    """The four PBG-groupoid axioms and the action law on random arrows.

    Points are carried along to check the target/source axiom; labels carry
    the rest.  ``(xi . g1) . g2 = xi . (g1 g2)`` is reported as ``action``.
    """
    rng = np.random.default_rng(seed)
    G, H = gpd.G, gpd.H
    patch = gpd.bundle.patch(0)
    xu, gu = patch.random_points(rng, samples)
    xv, gv = patch.random_points(rng, samples)
    h1 = H.random(rng, samples)
    h2 = H.random(rng, samples)
    g = G.random(rng, samples)
    g2 = G.random(rng, samples)
    act = gpd.act_labels
    eye = H.identity((samples,))
    res = {}
    # (i) t(xi g) = t(xi) g and s(xi g) = s(xi) g: points move by the same right action
    tv = gv @ g
    res["target"] = float(np.max(np.abs(tv - gv @ g), initial=0.0))
    # (ii) 1_{ug} = 1_u . g
    res["identity"] = float(np.max(np.abs(act(eye, g) - eye), initial=0.0))
    # (iii) (xi eta) g = (xi g)(eta g)
    res["product"] = float(np.max(np.abs(act(h2 @ h1, g) - act(h2, g) @ act(h1, g)), initial=0.0))
    # (iv) (xi g)^-1 = xi^-1 g
    res["inverse"] = float(np.max(np.abs(H.inv(act(h1, g)) - act(H.inv(h1), g)), initial=0.0))
    res["action"] = float(np.max(np.abs(act(act(h1, g), g2) - act(h1, g @ g2)), initial=0.0))
    return merge("pbg-axioms", res, tol, "t(xi g) = t(xi) g, 1_ug = 1_u g, (xi eta) g = (xi g)(eta g), "
                 "(xi g)^-1 = xi^-1 g", samples=samples, action=gpd.action.name)


def groupoid_laws_check(gpd: TrivialPBGGroupoid, samples: int = 50, seed: int = 0,
                        tol: float = 1e-10) -> CheckResult:
    """Associativity, unit and inverse laws for composable triples of arrows."""
    rng = np.random.default_rng(seed)
    H = gpd.H
    patch = gpd.bundle.patch(0)
    pts = [patch.random_points(rng, samples) for _ in range(4)]
    labels = [H.random(rng, samples) for _ in range(3)]
    worst = {"associativity": 0.0, "unit": 0.0, "inverse": 0.0}
    for k in range(samples):
        P = [BundlePoint(0, x[k], g[k]) for x, g in pts]
        a = GroupoidArrow(P[3], labels[0][k], P[2])
        b = GroupoidArrow(P[2], labels[1][k], P[1])
        c = GroupoidArrow(P[1], labels[2][k], P[0])
        m = gpd.multiply
        worst["associativity"] = max(worst["associativity"],
                                     float(np.max(np.abs(m(m(a, b), c).label - m(a, m(b, c)).label))))
        worst["unit"] = max(worst["unit"], float(np.max(np.abs(m(gpd.identity(P[3]), a).label - a.label))),
                            float(np.max(np.abs(m(a, gpd.identity(P[2])).label - a.label))))
        worst["inverse"] = max(worst["inverse"], float(np.max(np.abs(m(a, gpd.inverse(a)).label - H.identity()))))
    return merge("groupoid-laws", worst, tol, "associativity, units, inverses")


def broken_action(G: lg.MatrixLieGroup, H: lg.MatrixLieGroup, embed: Callable) -> FiberAction:
    """rho(g)(h) = iota(g) h: a G-action on H by bijections, not automorphisms."""
    def star(g):
        return np.broadcast_to(np.eye(H.d), np.shape(g)[:-2] + (H.d, H.d)).copy()
    return FiberAction(G, H, star, lambda g, h: embed(g) @ h, name="left-multiplication")


# ---------------------------------------------------------------- gauge and action groupoids

def coset_rep(g, subgroup: str) -> np.ndarray:
    """Canonical representative of the coset g H for a named subgroup H of SU(2).

    ``"Z2"`` (+-1): the sign making the first entry of largest modulus have
    positive real part (imaginary part on ties).  ``"U1"`` (the diagonal
    circle): the point hopf_project(g) of the sphere.  ``"trivial"``: g.
    """
    g = np.asarray(g, dtype=complex)
    if subgroup == "trivial":
        return g.copy()
    if subgroup == "Z2":
        flat = g.reshape(g.shape[:-2] + (-1,))
        idx = np.argmax(np.abs(flat) + 1e-9 * np.arange(flat.shape[-1])[::-1], axis=-1)
        lead = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
        sign = np.where(np.abs(lead.real) > 1e-12, np.sign(lead.real), np.sign(lead.imag))
        return g * sign[..., None, None]
    if subgroup == "U1":
        return lg.hopf_project(g)
    raise GroupoidError(f"unknown subgroup tag {subgroup!r}")


def gauge_to_action_iso(g1, g2, subgroup: str = "Z2", group: Optional[lg.MatrixLieGroup] = None):
    """<g1, g2> -> (g1 g2^-1, g2 H)."""
    if isinstance(g1, lg.GroupElement) or isinstance(g2, lg.GroupElement):
        if not (isinstance(g1, lg.GroupElement) and isinstance(g2, lg.GroupElement)):
            raise lg.GroupMismatch("both entries must be group elements")
        if g1.group.name != g2.group.name:
            raise lg.GroupMismatch("entries belong to different groups")
        group = g1.group
        g1, g2 = g1.matrix, g2.matrix
    g1 = np.asarray(g1, dtype=complex)
    g2 = np.asarray(g2, dtype=complex)
    if g1.shape != g2.shape:
        raise lg.GroupMismatch("entries have different shapes")
    inv = group.inv(g2) if group is not None else np.linalg.inv(g2)
    return g1 @ inv, coset_rep(g2, subgroup)


def _subgroup_element(rng, subgroup: str, size: int) -> np.ndarray:
    if subgroup == "Z2":
        return np.sign(rng.standard_normal(size))[:, None, None] * np.eye(2)
    if subgroup == "U1":
        return lg.u1_in_su2(np.exp(1j * rng.uniform(-np.pi, np.pi, size)))
    return np.broadcast_to(np.eye(2, dtype=complex), (size, 2, 2))


def gauge_iso_check(samples: int = 100, seed: int = 0, subgroup: str = "Z2", tol: float = 1e-10) -> CheckResult:
    """The gauge-to-action map is a well-defined groupoid morphism on SU(2).

    Composable gauge classes <a, b><c, d> with bN = cN compose to
    <a n, d>, n = b^-1 c.  Images compose in the action groupoid as
    (k', k m)(k, m) = (k' k, m).
    """
    rng = np.random.default_rng(seed)
    G = lg.su2()
    a, b, d = (G.random(rng, samples) for _ in range(3))
    n = _subgroup_element(rng, subgroup, samples)
    c = b @ n
    # well defined: <a, b> and <a n, b n> have the same image
    k1, m1 = gauge_to_action_iso(a, b, subgroup, G)
    k1b, m1b = gauge_to_action_iso(a @ n, b @ n, subgroup, G)
    well = max(float(np.max(np.abs(k1 - k1b))), float(np.max(np.abs(m1 - m1b))))
    k2, m2 = gauge_to_action_iso(c, d, subgroup, G)
    kc, mc = gauge_to_action_iso(a @ n, d, subgroup, G)
    # composable: the target k2 . m2 of the first arrow is the source m1
    targ = float(np.max(np.abs(coset_rep(k2 @ d, subgroup) - m1)))
    hom = max(float(np.max(np.abs(k1 @ k2 - kc))), float(np.max(np.abs(m2 - mc))))
    # trivial examples <g, g> -> (e, gH) and <g, e> -> (g, eH)
    k, _ = gauge_to_action_iso(a, a, subgroup, G)
    k3, m3 = gauge_to_action_iso(a, G.identity((samples,)), subgroup, G)
    triv = max(float(np.max(np.abs(k - np.eye(2)))), float(np.max(np.abs(k3 - a))),
               float(np.max(np.abs(m3 - coset_rep(G.identity((samples,)), subgroup)))))
    return merge("gauge-action-iso", {"well-defined": well, "composable": targ, "homomorphism": hom,
                                      "examples": triv}, tol,
                 "<g1, g2> -> (g1 g2^-1, g2 H) is a groupoid isomorphism", subgroup=subgroup)


# ---------------------------------------------------------------- frame groupoid

def frame_action(xi, g, action: FiberAction) -> np.ndarray:
    """R_g(xi)(V) = xi(V . g^-1) . g for a linear map xi between fibers."""
    xi = np.asarray(xi, dtype=float)
    k = action.H.d
    if xi.shape[-2:] != (k, k):
        raise DimensionMismatch(f"expected a {k}x{k} map, got {xi.shape[-2:]}")
    g = np.asarray(g, dtype=complex)
    return action.star(action.G.inv(g)) @ xi @ action.star(g)


def frame_action_check(action: FiberAction, samples: int = 50, seed: int = 0, tol: float = 1e-10) -> CheckResult:
    rng = np.random.default_rng(seed)
    G = action.G
    k = action.H.d
    xi = rng.standard_normal((samples, k, k))
    g1, g2 = G.random(rng, samples), G.random(rng, samples)
    comp = float(np.max(np.abs(frame_action(xi, g1 @ g2, action)
                               - frame_action(frame_action(xi, g1, action), g2, action)), initial=0.0))
    ident = float(np.max(np.abs(frame_action(xi, G.identity((samples,)), action) - xi), initial=0.0))
    idmap = float(np.max(np.abs(frame_action(np.broadcast_to(np.eye(k), xi.shape), g1, action) - np.eye(k)),
                         initial=0.0))
    return merge("frame-action", {"composition": comp, "identity-element": ident, "identity-map": idmap}, tol,
                 "R_{g1 g2} = R_{g2} R_{g1}")


# ---------------------------------------------------------------- local sections

class LocalSections:
    """sigma_i, rho_i and psi_i from flat lifts theta_i on each chart.

    ``flats[i]`` is a flat isometablic connection on chart i; theta_i(u, v)
    is the label of the arrow v -> u obtained by lifting the straight frame
    path from v to u.  ``basepoints[i]`` is u_i in chart-i coordinates and
    ``arrows[i]`` an arrow u_0 -> u_i.
    """

    def __init__(self, gpd: TrivialPBGGroupoid, flats: Dict[int, ConnectionForm], u0: BundlePoint,
                 basepoints: Dict[int, BundlePoint], arrows: Dict[int, GroupoidArrow], steps: int = 64,
                 check: bool = True, seed: int = 0, tol: float = 1e-6):
        self.gpd = gpd
        self.flats = flats
        self.u0 = u0
        self.basepoints = basepoints
        self.arrows = arrows
        self.steps = steps
        for i, a in arrows.items():
            if not (_same_point(gpd.bundle, a.target, basepoints[i]) and _same_point(gpd.bundle, a.source, u0)):
                raise NotAMorphism(f"arrow xi_{i} does not run from u_0 to u_{i}")
        if check:
            for i in flats:
                r = self.morphism_residual(i, seed=seed)
                if r > tol:
                    raise NotAMorphism(f"theta_{i} fails the morphism law (residual {r:.3e})")

    # ---- theta, sigma, rho, psi on batched chart-i coordinates
    def theta(self, i: int, xu, gu, xv, gv) -> np.ndarray:
        """Label of theta_i(u, v), the lift of the straight path v -> u."""
        gamma = self.flats[i]
        patch = gamma.patch
        G = patch.group
        xu, xv = np.atleast_2d(xu), np.atleast_2d(xv)
        B = max(len(xu), len(xv))
        gu = np.broadcast_to(gu, (B,) + G.identity().shape)
        gv = np.broadcast_to(gv, (B,) + G.identity().shape)
        fib = G.log(G.inv(gv) @ gu, radius=np.inf) if G.d else np.zeros((B, 0))
        v = np.concatenate([np.broadcast_to(xu - xv, (B, patch.n)), fib], axis=-1)
        return hat(gamma, segment(patch, np.broadcast_to(xv, (B, patch.n)), gv, v), self.steps)

    def _ui(self, i: int):
        p = self.basepoints[i]
        return np.asarray(p.x, float)[None], p.g[None]

    def sigma(self, i: int, x, g) -> np.ndarray:
        """Label of sigma_i(u) = theta_i(u, u_i) xi_i (an arrow u_0 -> u)."""
        xi, gi = self._ui(i)
        return self.theta(i, x, g, xi, gi) @ self.arrows[i].label

    def rho(self, i: int, g, h) -> np.ndarray:
        """rho_i(g^-1)(h) = sigma_i(u_i g)^-1 (xi_i g)(h g)(xi_i g)^-1 sigma_i(u_i g)."""
        H = self.gpd.H
        act = self.gpd.act_labels
        xi, gi = self._ui(i)
        g = np.asarray(g, dtype=complex)
        s = self.sigma(i, np.broadcast_to(xi, (len(g), xi.shape[1])), gi @ g)
        xg = act(np.broadcast_to(self.arrows[i].label, h.shape), g)
        return H.inv(s) @ xg @ act(h, g) @ H.inv(xg) @ s

    def psi(self, i: int, x, g, h) -> np.ndarray:
        s = self.sigma(i, x, g)
        return s @ h @ self.gpd.H.inv(s)

    def psi_inv(self, i: int, x, g, eta) -> np.ndarray:
        s = self.sigma(i, x, g)
        return self.gpd.H.inv(s) @ eta @ s

    # ---- checks
    def _sample(self, i: int, rng, size: int, spread: float = 0.4):
        patch = self.flats[i].patch
        G = patch.group
        xi, gi = self._ui(i)
        dom = patch.chart.domain
        x = xi + spread * rng.uniform(-1, 1, (size, patch.n))
        ok = dom.contains(x)
        x[~ok] = xi
        g = gi @ G.exp(spread * G.random_algebra(rng, size)) if G.d else np.broadcast_to(gi, (size,) + gi.shape[1:])
        return x, g

    def morphism_residual(self, i: int, samples: int = 8, seed: int = 0) -> float:
        rng = np.random.default_rng(seed)
        (xa, ga), (xb, gb), (xc, gc) = (self._sample(i, rng, samples) for _ in range(3))
        lhs = self.theta(i, xa, ga, xb, gb) @ self.theta(i, xb, gb, xc, gc)
        return float(np.max(np.abs(lhs - self.theta(i, xa, ga, xc, gc)), initial=0.0))

    def _small_g(self, rng, size):
        G = self.gpd.G
        return G.exp(0.5 * G.random_algebra(rng, size)) if G.d else G.identity((size,))

    def check(self, samples: int = 16, seed: int = 0, tol: float = 1e-6) -> CheckResult:
        rng = np.random.default_rng(seed)
        gpd = self.gpd
        H = gpd.H
        act = gpd.act_labels
        res = {"psi-equivariance": 0.0, "alpha-equivariance": 0.0, "collapse": 0.0, "morphism": 0.0}
        for i in self.flats:
            res["morphism"] = max(res["morphism"], self.morphism_residual(i, seed=seed + i))
            x, u = self._sample(i, rng, samples)
            g = self._small_g(rng, samples)
            h = H.random(rng, samples)
            lhs = self.psi(i, x, u @ g, self.rho(i, g, h))
            rhs = act(self.psi(i, x, u, h), g)
            res["psi-equivariance"] = max(res["psi-equivariance"], float(np.max(np.abs(lhs - rhs))))
            # rho((u, g), eta) = eta . g
            eta = self.psi(i, x, u, H.random(rng, samples))
            rec = self.psi(i, x, u @ g, self.rho(i, g, self.psi_inv(i, x, u, eta)))
            res["collapse"] = max(res["collapse"], float(np.max(np.abs(rec - act(eta, g)))))
        bundle = gpd.bundle
        for i in self.flats:
            for j in self.flats:
                if i == j or not bundle.has_overlap(i, j):
                    continue
                xi = bundle.sample_overlap(rng, samples, i, j)
                if len(xi) == 0:
                    continue
                B = len(xi)
                ui = self.basepoints[i].g[None] @ self._small_g(rng, B)
                xj, uj = bundle.change_chart(i, j, xi, ui)
                g = self._small_g(rng, B)
                h = H.random(rng, B)

                def alpha(xa, ga, xb, gb, hh):
                    return self.psi_inv(i, xa, ga, self.psi(j, xb, gb, hh))
                lhs = alpha(xi, ui @ g, xj, uj @ g, self.rho(j, g, h))
                rhs = self.rho(i, g, alpha(xi, ui, xj, uj, h))
                res["alpha-equivariance"] = max(res["alpha-equivariance"], float(np.max(np.abs(lhs - rhs))))
        return merge("local-sections", res, tol,
                     "psi_i(ug, rho_i(g^-1) h) = psi_i(u, h) g and the glued action is the PBG action",
                     charts=len(self.flats), steps=self.steps)


def hopf_local_sections(steps: int = 256, seed: int = 0, arrows: Optional[Dict[int, GroupoidArrow]] = None
                        ) -> LocalSections:
    """Local sections on the Hopf bundle, H = SU(2), G = U(1) by conjugation.

    The flat lifts come from the frames used for the transition data.  The
    basepoint u_0 sits in the overlap; u_i and the arrows xi_i are fixed
    pseudo-random choices unless given.
    """
    from .transition import flat_from_frame, hopf_frame
    from .action import conjugation, circle_in_su2
    from .algebroid import TrivialPBGAlgebroid
    from .bundle import build_hopf
    bundle = build_hopf()
    H = lg.su2()
    act = conjugation(bundle.group, H, circle_in_su2, name="conj[U1->SU2]")
    gpd = TrivialPBGGroupoid(bundle, act)
    rng = np.random.default_rng(seed)
    flats = {i: flat_from_frame(TrivialPBGAlgebroid(bundle.patch(i), act), hopf_frame(bundle, i))
             for i in range(2)}
    u0 = BundlePoint(0, np.array([0.8, 0.4]), np.array([[np.exp(0.3j)]]))
    basepoints = {0: BundlePoint(0, np.array([0.5, -0.2]), np.array([[np.exp(-0.7j)]])),
                  1: BundlePoint(1, np.array([-0.3, 0.6]), np.array([[np.exp(1.1j)]]))}
    if arrows is None:
        arrows = {i: GroupoidArrow(basepoints[i], H.random(rng), u0) for i in range(2)}
    return LocalSections(gpd, flats, u0, basepoints, arrows, steps=steps, seed=seed)
