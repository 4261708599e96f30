"""Matrix Lie groups given by an ordered basis of their Lie algebra.

Group elements are complex ``(n, n)`` arrays and algebra elements are real
coordinate vectors in the basis, so batched code can stack them along a
leading axis.  The thin :class:`GroupElement` / :class:`AlgebraElement`
wrappers carry the group along for the public single-element API.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm, logm

MEMBERSHIP_TOL = 1e-8
CLOSURE_TOL = 1e-10


class LieGroupError(ValueError):
    pass


class GroupMismatch(LieGroupError):
    pass


class NotInGroup(LieGroupError):
    pass


class OutOfInjectivityRadius(LieGroupError):
    pass


class BasisNotClosed(LieGroupError):
    pass


def _as_c(a) -> np.ndarray:
    return np.asarray(a, dtype=complex)


class MatrixLieGroup:
    """A matrix group fixed by its algebra basis ``E_1..E_d``.

    :param family: ``"unitary"``, ``"orthogonal"`` or ``"none"``; decides the
        membership test and the projection back onto the group.
    :param special: require determinant one (SU(n), SO(n)).
    """

    def __init__(self, name: str, basis, family: str = "none", special: bool = False,
                 size: Optional[int] = None):
        basis = _as_c(basis)
        if basis.size == 0:
            if size is None:
                raise LieGroupError("an empty basis needs an explicit matrix size")
            basis = np.zeros((0, size, size), dtype=complex)
        if basis.ndim != 3 or basis.shape[1] != basis.shape[2]:
            raise LieGroupError("basis must be a stack of square matrices")
        if family not in ("unitary", "orthogonal", "none"):
            raise LieGroupError(f"unknown family tag {family!r}")
        self.name = name
        self.basis = basis
        self.d = basis.shape[0]
        self.n = basis.shape[1]
        self.family = family
        self.special = special
        self.is_real = bool(np.allclose(basis.imag, 0.0))
        # real-linear coordinate map: stack real and imaginary parts
        flat = basis.reshape(self.d, self.n * self.n)
        self._B = np.concatenate([flat.real, flat.imag], axis=1).T  # (2n^2, d)
        if self.d:
            if np.linalg.matrix_rank(self._B) < self.d:
                raise LieGroupError("basis matrices are linearly dependent")
            self._Bpinv = np.linalg.pinv(self._B)
        else:
            self._Bpinv = np.zeros((0, 2 * self.n * self.n))
        self.structure = self._structure_constants()

    # ---- algebra coordinates

    def coords(self, M) -> np.ndarray:
        """Basis coordinates of matrices ``M`` with shape (..., n, n)."""
        M = _as_c(M)
        flat = M.reshape(M.shape[:-2] + (-1,))
        stacked = np.concatenate([flat.real, flat.imag], axis=-1)
        return stacked @ self._Bpinv.T

    def coords_residual(self, M) -> float:
        M = _as_c(M)
        return float(np.max(np.abs(self.matrix(self.coords(M)) - M), initial=0.0))

    def matrix(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return np.tensordot(v, self.basis, axes=([-1], [0]))

    def _structure_constants(self) -> np.ndarray:
        d = self.d
        c = np.zeros((d, d, d))
        worst = 0.0
        for i in range(d):
            for j in range(d):
                C = self.basis[i] @ self.basis[j] - self.basis[j] @ self.basis[i]
                c[:, i, j] = self.coords(C)
                worst = max(worst, float(np.max(np.abs(self.matrix(c[:, i, j]) - C))))
        if worst > CLOSURE_TOL:
            raise BasisNotClosed(f"basis of {self.name} not closed under the commutator "
                                 f"(residual {worst:.3e})")
        return c

    def bracket(self, v, w) -> np.ndarray:
        """[v, w] in coordinates, batched over leading axes."""
        return np.einsum("kij,...i,...j->...k", self.structure, v, w)

    def ad_matrix(self, v) -> np.ndarray:
        """Matrix of ad(v): w -> [v, w]."""
        return np.einsum("kij,...i->...kj", self.structure, v)

    def Ad(self, g, v) -> np.ndarray:
        g = _as_c(g)
        return self.coords(g @ self.matrix(v) @ self.inv(g))

    def Ad_matrix(self, g) -> np.ndarray:
        """Matrix of Ad(g) in the basis, batched over g."""
        g = _as_c(g)
        gi = self.inv(g)
        conj = np.einsum("...ab,kbc,...cd->...kad", g, self.basis, gi)
        return np.swapaxes(self.coords(conj), -1, -2)

    # ---- group level

    def identity(self, batch: Sequence[int] = ()) -> np.ndarray:
        return np.broadcast_to(np.eye(self.n, dtype=complex), tuple(batch) + (self.n, self.n)).copy()

    def inv(self, g) -> np.ndarray:
        g = _as_c(g)
        if self.family in ("unitary", "orthogonal"):
            return np.conj(np.swapaxes(g, -1, -2))
        return np.linalg.inv(g)

    def exp(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.d == 0:
            return self.identity(v.shape[:-1])
        return expm(self.matrix(v))

    def log(self, g, radius: float = 1.0) -> np.ndarray:
        """Principal logarithm; refuses elements with ||g - I||_2 >= radius."""
        g = _as_c(g)
        single = g.ndim == 2
        gs = g[None] if single else g.reshape((-1, self.n, self.n))
        out = np.zeros((gs.shape[0], self.d))
        eye = np.eye(self.n)
        for k, gk in enumerate(gs):
            dist = np.linalg.norm(gk - eye, 2)
            if dist >= radius:
                raise OutOfInjectivityRadius(f"||g - I|| = {dist:.3f} is not below {radius}")
            if self.d:
                out[k] = self.coords(logm(gk))
        if single:
            return out[0]
        return out.reshape(g.shape[:-2] + (self.d,))

    def membership_residual(self, g) -> float:
        g = _as_c(g)
        eye = np.eye(self.n)
        res = 0.0
        if self.family in ("unitary", "orthogonal"):
            res = float(np.max(np.abs(g @ np.conj(np.swapaxes(g, -1, -2)) - eye), initial=0.0))
        if self.family == "orthogonal":
            res = max(res, float(np.max(np.abs(g.imag), initial=0.0)))
        if self.special:
            res = max(res, float(np.max(np.abs(np.linalg.det(g) - 1.0), initial=0.0)))
        if self.family == "none" and not self.special:
            if np.any(np.abs(np.linalg.det(g)) < 1e-12):
                return float("inf")
        return res

    def check_member(self, g, tol: float = MEMBERSHIP_TOL) -> None:
        r = self.membership_residual(g)
        if r > tol:
            raise NotInGroup(f"element not in {self.name} (residual {r:.3e})")

    def project(self, g) -> np.ndarray:
        """Nearest group element by polar projection (unitary/orthogonal families)."""
        g = _as_c(g)
        if self.family == "none":
            return g
        u, _, vh = np.linalg.svd(g)
        q = u @ vh
        if self.family == "orthogonal":
            q = q.real.astype(complex)
        if self.special:
            det = np.linalg.det(q)
            if self.family == "orthogonal":
                # flip the last singular direction when det = -1
                sign = np.sign(det.real)
                fix = np.ones(q.shape[:-1])
                fix[..., -1] = sign
                q = (u * fix[..., None, :]) @ vh
                q = q.real.astype(complex)
            else:
                q = q * (det ** (-1.0 / self.n))[..., None, None]
        return q

    # ---- sampling

    def random_algebra(self, rng: np.random.Generator, size=(), scale: float = 1.0) -> np.ndarray:
        shape = (size,) if isinstance(size, int) else tuple(size)
        return scale * rng.standard_normal(shape + (self.d,))

    def random(self, rng: np.random.Generator, size=(), scale: float = 2.0) -> np.ndarray:
        return self.project(self.exp(self.random_algebra(rng, size, scale)))

    def fiber_var_names(self) -> list:
        names = []
        for a in range(self.n):
            for b in range(self.n):
                names.append(f"gr{a + 1}{b + 1}")
                if not self.is_real:
                    names.append(f"gi{a + 1}{b + 1}")
        return names

    def fiber_env(self, g) -> dict:
        """DSL bindings gr{ab}/gi{ab} for the real/imaginary entries of g."""
        g = _as_c(g)
        env = {}
        for a in range(self.n):
            for b in range(self.n):
                env[f"gr{a + 1}{b + 1}"] = g[..., a, b].real
                if not self.is_real:
                    env[f"gi{a + 1}{b + 1}"] = g[..., a, b].imag
        return env

    def __repr__(self):
        return f"MatrixLieGroup({self.name!r}, n={self.n}, d={self.d})"


# ---------------------------------------------------------------- built-ins

PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)


def su2() -> MatrixLieGroup:
    """SU(2) with E_j = -(i/2) sigma_j, so that [E1, E2] = E3 cyclically."""
    return MatrixLieGroup("SU2", -0.5j * PAULI, family="unitary", special=True)


def so3() -> MatrixLieGroup:
    L = np.zeros((3, 3, 3))
    for i in range(3):
        for j in range(3):
            for k in range(3):
                L[i, j, k] = -_levi_civita(i, j, k)
    return MatrixLieGroup("SO3", L, family="orthogonal", special=True)


def u1() -> MatrixLieGroup:
    return MatrixLieGroup("U1", [[[1j]]], family="unitary")


def so2() -> MatrixLieGroup:
    # orientation chosen so that u1_to_so2 sends the generator i to 2*J
    return MatrixLieGroup("SO2", [[[0.0, 1.0], [-1.0, 0.0]]], family="orthogonal", special=True)


def trivial_group() -> MatrixLieGroup:
    return MatrixLieGroup("E", np.zeros((0, 1, 1)), family="unitary", size=1)


def _levi_civita(i, j, k) -> int:
    return int(np.sign((j - i) * (k - i) * (k - j)))


BUILTIN = {"SU2": su2, "SO3": so3, "U1": u1, "SO2": so2, "E": trivial_group}


def builtin(name: str) -> MatrixLieGroup:
    try:
        return BUILTIN[name]()
    except KeyError:
        raise LieGroupError(f"unknown built-in group {name!r}") from None


def from_basis_pairs(name: str, pairs, family: str = "none", special: bool = False) -> MatrixLieGroup:
    """Build a group from basis matrices written as nested [re, im] pairs."""
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 4 or arr.shape[-1] != 2:
        raise LieGroupError("basis must have shape (d, n, n, 2)")
    return MatrixLieGroup(name, arr[..., 0] + 1j * arr[..., 1], family=family, special=special)


# ---------------------------------------------------------------- element API

@dataclass(frozen=True)
class GroupElement:
    group: MatrixLieGroup
    matrix: np.ndarray = field(repr=False)

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        _same(self.group, other.group)
        return GroupElement(self.group, self.matrix @ other.matrix)

    def inverse(self) -> "GroupElement":
        return GroupElement(self.group, self.group.inv(self.matrix))


@dataclass(frozen=True)
class AlgebraElement:
    group: MatrixLieGroup
    coords: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return self.group.matrix(self.coords)

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        _same(self.group, other.group)
        return AlgebraElement(self.group, self.coords + other.coords)

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        _same(self.group, other.group)
        return AlgebraElement(self.group, self.coords - other.coords)

    def __rmul__(self, s: float) -> "AlgebraElement":
        return AlgebraElement(self.group, s * self.coords)


def _same(a: MatrixLieGroup, b: MatrixLieGroup) -> None:
    if a is not b and a.name != b.name:
        raise GroupMismatch(f"{a.name} vs {b.name}")


def element(group: MatrixLieGroup, matrix) -> GroupElement:
    m = _as_c(matrix)
    group.check_member(m)
    return GroupElement(group, m)


def algebra(group: MatrixLieGroup, coords) -> AlgebraElement:
    return AlgebraElement(group, np.asarray(coords, dtype=float))


def exp(V: AlgebraElement) -> GroupElement:
    return GroupElement(V.group, V.group.exp(V.coords))


def log(g: GroupElement, radius: float = 1.0) -> AlgebraElement:
    return AlgebraElement(g.group, g.group.log(g.matrix, radius))


def bracket(V: AlgebraElement, W: AlgebraElement) -> AlgebraElement:
    _same(V.group, W.group)
    return AlgebraElement(V.group, V.group.bracket(V.coords, W.coords))


def Ad(g: GroupElement, V: AlgebraElement) -> AlgebraElement:
    _same(g.group, V.group)
    return AlgebraElement(V.group, V.group.Ad(g.matrix, V.coords))


# ---------------------------------------------------------------- quaternionic maps

def su2_entries(q) -> tuple:
    """(s, t) with q = [[s, t], [-conj(t), conj(s)]]."""
    q = _as_c(q)
    return q[..., 0, 0], q[..., 0, 1]


def su2_from_entries(s, t) -> np.ndarray:
    s = np.asarray(s, dtype=complex)
    t = np.asarray(t, dtype=complex)
    out = np.empty(s.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = s
    out[..., 0, 1] = t
    out[..., 1, 0] = -np.conj(t)
    out[..., 1, 1] = np.conj(s)
    return out


def u1_in_su2(z) -> np.ndarray:
    """The circle z -> (z, 0), i.e. diag(z, conj z)."""
    z = np.asarray(z, dtype=complex)
    return su2_from_entries(z, np.zeros_like(z))


def _unwrap(x, group_name: Optional[str] = None) -> np.ndarray:
    if isinstance(x, GroupElement):
        if group_name and x.group.name != group_name:
            raise GroupMismatch(f"expected an element of {group_name}, got {x.group.name}")
        return x.matrix
    return _as_c(x)


def _check_su2(q) -> None:
    s, t = su2_entries(q)
    res = np.abs(q[..., 1, 0] + np.conj(t)) + np.abs(q[..., 1, 1] - np.conj(s))
    res = res + np.abs(np.abs(s) ** 2 + np.abs(t) ** 2 - 1.0)
    if np.max(res, initial=0.0) > MEMBERSHIP_TOL:
        raise NotInGroup(f"not in SU(2) (residual {np.max(res):.3e})")


def hopf_project(q) -> np.ndarray:
    """(-2 Re(st), -2 Im(st), 1 - 2|t|^2) for q = (s, t); batched."""
    q = _unwrap(q, "SU2")
    _check_su2(q)
    s, t = su2_entries(q)
    st = s * t
    return np.stack([-2.0 * st.real, -2.0 * st.imag, 1.0 - 2.0 * np.abs(t) ** 2], axis=-1)


# pure quaternions i, j, k as 2x2 complex matrices (s = i; t = 1; t = i)
_QUAT = np.array([[[1j, 0], [0, -1j]], [[0, 1], [-1, 0]], [[0, 1j], [1j, 0]]], dtype=complex)


def su2_to_so3(q) -> np.ndarray:
    """Rotation r -> q r q^{-1} of the pure quaternions, as a 3x3 matrix."""
    q = _unwrap(q, "SU2")
    _check_su2(q)
    qi = np.conj(np.swapaxes(q, -1, -2))
    conj = np.einsum("...ab,kbc,...cd->...kad", q, _QUAT, qi)
    # <A, B> = Re tr(A^H B) / 2 is orthonormal on the i, j, k matrices
    A = 0.5 * np.einsum("jba,...kba->...jk", np.conj(_QUAT), conj).real
    return A


def u1_to_so2(z) -> np.ndarray:
    """[[cos 2t, sin 2t], [-sin 2t, cos 2t]] for z = e^{it}; batched."""
    if isinstance(z, GroupElement):
        if z.group.name != "U1":
            raise GroupMismatch(f"expected an element of U1, got {z.group.name}")
        z = z.matrix[..., 0, 0]
    z = np.asarray(z, dtype=complex)
    if np.max(np.abs(np.abs(z) - 1.0), initial=0.0) > MEMBERSHIP_TOL:
        raise NotInGroup("|z| must be 1")
    theta = np.angle(z)
    c, s = np.cos(2 * theta), np.sin(2 * theta)
    return np.stack([np.stack([c, s], -1), np.stack([-s, c], -1)], -2)
