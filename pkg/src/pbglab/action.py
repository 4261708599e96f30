"""Actions of the structure group G on a fiber group H and its algebra.

``star(g)`` is the matrix of the algebra automorphism rho_*(g) on the fiber
algebra; ``act(g, h)`` is the group automorphism rho(g)(h).  Right actions
follow the fixed convention ``V . g = rho_*(g^-1) V`` and
``h . g = rho(g^-1)(h)`` so that ``(V . g1) . g2 = V . (g1 g2)``.
"""
from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from . import liegroup as lg
from .expr import Compiled


class ActionError(ValueError):
    pass


class FiberAction:
    def __init__(self, G: lg.MatrixLieGroup, H: lg.MatrixLieGroup,
                 star: Callable[[np.ndarray], np.ndarray],
                 act: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
                 name: str = "custom"):
        self.G = G
        self.H = H
        self._star = star
        self._act = act
        self.name = name

    def star(self, g) -> np.ndarray:
        """Matrix of rho_*(g) on the fiber algebra, batched over g."""
        return self._star(np.asarray(g, dtype=complex))

    def right(self, V, g) -> np.ndarray:
        """V . g = rho_*(g^-1) V."""
        return np.einsum("...ij,...j->...i", self.star(self.G.inv(g)), V)

    def act(self, g, h) -> np.ndarray:
        """rho(g)(h) on fiber group elements."""
        g = np.asarray(g, dtype=complex)
        h = np.asarray(h, dtype=complex)
        if self._act is not None:
            return self._act(g, h)
        # integrate the algebra action: rho(g)(exp V) = exp(rho_*(g) V)
        V = self.H.log(h)
        return self.H.exp(np.einsum("...ij,...j->...i", self.star(g), V))

    def right_group(self, h, g) -> np.ndarray:
        """h . g = rho(g^-1)(h)."""
        return self.act(self.G.inv(g), h)

    def homomorphism_residual(self, rng: np.random.Generator, samples: int = 50) -> float:
        g1 = self.G.random(rng, samples)
        g2 = self.G.random(rng, samples)
        lhs = self.star(g1 @ g2)
        rhs = self.star(g1) @ self.star(g2)
        return float(np.max(np.abs(lhs - rhs), initial=0.0))

    def automorphism_residual(self, rng: np.random.Generator, samples: int = 50) -> float:
        """max |rho_*(g)[V, W] - [rho_*(g)V, rho_*(g)W]| on samples."""
        if self.H.d == 0:
            return 0.0
        g = self.G.random(rng, samples)
        V = self.H.random_algebra(rng, samples)
        W = self.H.random_algebra(rng, samples)
        S = self.star(g)
        lhs = np.einsum("nij,nj->ni", S, self.H.bracket(V, W))
        rhs = self.H.bracket(np.einsum("nij,nj->ni", S, V), np.einsum("nij,nj->ni", S, W))
        return float(np.max(np.abs(lhs - rhs), initial=0.0))


def trivial(G: lg.MatrixLieGroup, H: lg.MatrixLieGroup) -> FiberAction:
    eye = np.eye(H.d)

    def star(g):
        return np.broadcast_to(eye, g.shape[:-2] + (H.d, H.d)).copy()
    return FiberAction(G, H, star, lambda g, h: np.array(h, copy=True), name="trivial")


def adjoint(G: lg.MatrixLieGroup) -> FiberAction:
    return FiberAction(G, G, G.Ad_matrix, lambda g, h: g @ h @ G.inv(g), name="Ad")


def conjugation(G: lg.MatrixLieGroup, H: lg.MatrixLieGroup,
                embed: Callable[[np.ndarray], np.ndarray], name: str = "conjugation") -> FiberAction:
    """rho(g)(h) = iota(g) h iota(g)^-1 for a homomorphism iota: G -> H."""
    def star(g):
        return H.Ad_matrix(embed(g))

    def act(g, h):
        e = embed(g)
        return e @ h @ H.inv(e)
    return FiberAction(G, H, star, act, name=name)


def circle_in_su2(g) -> np.ndarray:
    """U(1) -> SU(2), z -> diag(z, conj z)."""
    return lg.u1_in_su2(np.asarray(g, dtype=complex)[..., 0, 0])


EMBEDDINGS = {"U1->SU2": circle_in_su2}


def dsl_star(G: lg.MatrixLieGroup, H: lg.MatrixLieGroup, entries) -> FiberAction:
    """rho_* given as a d' x d' matrix of DSL expressions in the fiber entries."""
    k = H.d
    if len(entries) != k or any(len(r) != k for r in entries):
        raise ActionError(f"action matrix must be {k}x{k}")
    comp = [[Compiled(e) for e in row] for row in entries]

    def star(g):
        env = G.fiber_env(g)
        shape = g.shape[:-2]
        out = np.zeros(shape + (k, k))
        for a in range(k):
            for b in range(k):
                out[..., a, b] = comp[a][b](env)
        return out
    return FiberAction(G, H, star, None, name="matrix")


def from_json(obj, G: lg.MatrixLieGroup, H: lg.MatrixLieGroup) -> FiberAction:
    if obj == "Ad":
        if G.name != H.name or G.d != H.d:
            raise ActionError("the 'Ad' action needs the fiber group to equal the structure group")
        return adjoint(G)
    if obj == "trivial":
        return trivial(G, H)
    if isinstance(obj, dict) and "embed" in obj:
        name = obj["embed"]
        if name not in EMBEDDINGS:
            raise ActionError(f"unknown embedding {name!r}")
        return conjugation(G, H, EMBEDDINGS[name], name=f"conj[{name}]")
    if isinstance(obj, dict) and "matrix" in obj:
        return dsl_star(G, H, obj["matrix"])
    raise ActionError(f"unrecognised action {obj!r}")
