"""Transition data (chi, alpha) built from local flat connections, and its checks.

On an overlap P_ij the data are an h-valued 1-form chi_ij and a map
alpha_ij: P_ij -> Aut(h), stored as k x k matrices.  Given flat isometablic
connections theta_i, theta_j and LAB charts Psi_i, Psi_j (maps P_i -> Aut(h))
the construction is

    chi_ij = Psi_i^-1 (theta_i - theta_j),     alpha_ij = Psi_i^-1 Psi_j

Conventions pinned by running the construction on the Hopf bundle:

* Maurer-Cartan: ``d chi - [chi, chi] = 0`` with d and [.,.] as in
  :mod:`pbglab.connection` (``MC_SIGN = -1``).
* cocycle: ``chi_ik = chi_ij + alpha_ij(chi_jk)``.
* Darboux derivative: right logarithmic, ``X(alpha) alpha^-1 = ad chi(X)``.
* G acts on Aut(h) by ``(alpha . g)(V) = (alpha(V . g^-1)) . g``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, permutations
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import liegroup as lg
from .action import FiberAction, conjugation, circle_in_su2, trivial as trivial_action
from .algebroid import SCALAR_STEP, TrivialPBGAlgebroid, directional
from .bundle import (Chart, ChartedBundle, Domain, HopfBundle, Overlap, build_hopf)
from .connection import ConnectionForm, NotIsometablic, curvature_tensor, isometablic_check
from .expr import Compiled
from .result import CheckResult, merge

MC_SIGN = -1
DARBOUX_SIDE = "right"
COCYCLE_FORM = "chi_ik = chi_ij + alpha_ij(chi_jk)"


class TransitionError(ValueError):
    pass


class NotFlat(TransitionError):
    pass


class SingularAlpha(TransitionError):
    pass


Frame = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _stencil(patch, f, x, g, v, h=1e-3):
    """Fourth-order central difference of f along the frame vector v."""
    fp2 = f(*patch.flow(x, g, v, 2 * h))
    fp1 = f(*patch.flow(x, g, v, h))
    fm1 = f(*patch.flow(x, g, v, -h))
    fm2 = f(*patch.flow(x, g, v, -2 * h))
    return (-fp2 + 8 * fp1 - 8 * fm1 + fm2) / (12 * h)


def flat_from_frame(alg: TrivialPBGAlgebroid, frame: Frame, label: str = "theta") -> ConnectionForm:
    """The flat connection omega(X) = -(X k) k^-1 of an H-valued frame k."""
    H = alg.fiber
    patch = alg.patch

    def form(x, g, v):
        K = frame(x, g)
        dK = _stencil(patch, frame, x, g, v)
        return -H.coords(dK @ H.inv(K))
    return ConnectionForm.from_form(alg, form, label)


def lab_chart_from_frame(H: lg.MatrixLieGroup, frame: Frame) -> Callable:
    """Psi_u = Ad(k(u)) as k x k matrices."""
    return lambda x, g: H.Ad_matrix(frame(np.atleast_2d(x), g))


def frame_in_chart(bundle: ChartedBundle, src: int, dst: int, frame: Frame) -> Frame:
    """Re-express a chart-``src`` frame as a function of chart-``dst`` coordinates."""
    if src == dst:
        return frame

    def f(x, g):
        xs, gs = bundle.change_chart(dst, src, x, g)
        return frame(xs, gs)
    return f


def pushforward(bundle: ChartedBundle, i: int, j: int, x, g, v, h: float = 1e-5) -> np.ndarray:
    """Chart-j frame coefficients of the chart-i frame vector v at (x, g)."""
    if i == j:
        return np.array(v, dtype=float, copy=True)
    patch = bundle.patch(i)
    G = bundle.group
    xj, gj = bundle.change_chart(i, j, x, g)
    xp, gp = bundle.change_chart(i, j, *patch.flow(x, g, v, h))
    xm, gm = bundle.change_chart(i, j, *patch.flow(x, g, v, -h))
    base = (xp - xm) / (2 * h)
    if G.d == 0:
        return base
    gji = G.inv(gj)
    fib = (G.log(gji @ gp) - G.log(gji @ gm)) / (2 * h)
    return np.concatenate([base, fib], axis=-1)


@dataclass
class TransitionPair:
    """(chi_ij, alpha_ij) on the chart-i patch of the overlap P_ij."""
    i: int
    j: int
    chi: ConnectionForm
    alpha: Callable
    sampler: Callable
    source: str = "dsl"

    @property
    def algebroid(self) -> TrivialPBGAlgebroid:
        return self.chi.algebroid

    def sample(self, rng, size):
        return self.sampler(rng, size)


@dataclass
class TransitionData:
    bundle: ChartedBundle
    action: FiberAction
    pairs: Dict[Tuple[int, int], TransitionPair] = field(default_factory=dict)
    label: str = "transition"

    def pair(self, i: int, j: int) -> TransitionPair:
        try:
            return self.pairs[(i, j)]
        except KeyError:
            raise TransitionError(f"no transition data for overlap ({i}, {j})") from None

    def triples(self) -> List[Tuple[int, int, int]]:
        idx = sorted({a for p in self.pairs for a in p})
        out = []
        for i, j, k in permutations(idx, 3):
            if (i, j) in self.pairs and (i, k) in self.pairs and (j, k) in self.pairs:
                out.append((i, j, k))
        return out


def _overlap_sampler(bundle: ChartedBundle, i: int, j: int):
    G = bundle.group

    def sample(rng, size):
        x = bundle.sample_overlap(rng, size, i, j)
        if len(x) == 0:
            raise TransitionError(f"charts {i} and {j} have an empty overlap")
        return x, G.random(rng, len(x))
    return sample


def build_from_flats(theta_i: ConnectionForm, theta_j: ConnectionForm, psi_i: Callable,
                     psi_j: Callable, i: int = 0, j: int = 1, sampler: Optional[Callable] = None,
                     check: bool = True, seed: int = 0, samples: int = 20) -> TransitionPair:
    """chi_ij = Psi_i^-1 (theta_i - theta_j) and alpha_ij = Psi_i^-1 Psi_j.

    All four inputs live on the same chart-i patch of the overlap.  With
    ``check`` both connections are tested for isometablicity and flatness on
    samples first.
    """
    alg = theta_i.algebroid
    if theta_j.algebroid is not alg:
        raise TransitionError("both flat connections must live on the same patch")
    if sampler is None:
        sampler = lambda rng, size: alg.random_points(rng, size)
    if check:
        rng = np.random.default_rng(seed)
        for th in (theta_i, theta_j):
            x, g = sampler(rng, samples)
            # isometablicity on overlap points
            gg = alg.patch.group.random(rng, len(x))
            v = rng.standard_normal((len(x), alg.dim))
            lhs = th.omega(x, g @ gg, alg.patch.tangent_right_action(v, gg))
            rhs = alg.action.right(th.omega(x, g, v), gg)
            iso = float(np.max(np.abs(lhs - rhs), initial=0.0))
            if iso > 1e-6:
                raise NotIsometablic(f"{th.label}: isometablic residual {iso:.3e}")
            curv = float(np.max(np.abs(curvature_tensor(th, x[:5], g[:5])), initial=0.0))
            if curv > 1e-6:
                raise NotFlat(f"{th.label}: curvature reaches {curv:.3e}")
    H = alg.fiber

    def chi_form(x, g, v):
        P = psi_i(x, g)
        return np.linalg.solve(P, (theta_i.omega(x, g, v) - theta_j.omega(x, g, v))[..., None])[..., 0]

    def alpha(x, g):
        return np.linalg.solve(psi_i(x, g), psi_j(x, g))

    chi = ConnectionForm.from_form(alg, chi_form, f"chi[{i}{j}]")
    return TransitionPair(i, j, chi, alpha, sampler, source="flats")


# ---------------------------------------------------------------- checks

def exterior_derivative(form: ConnectionForm, X, Y, x, g, step: float = SCALAR_STEP) -> np.ndarray:
    """d form(X, Y) = X(form Y) - Y(form X) - form([X, Y]) for constant frame fields."""
    patch = form.patch
    N = np.atleast_2d(x).shape[0]
    Xb = np.broadcast_to(np.asarray(X, float), (N, patch.dim))
    Yb = np.broadcast_to(np.asarray(Y, float), (N, patch.dim))
    fy = directional(patch, lambda a, b: form.omega(a, b, Yb[: len(np.atleast_2d(a))]), x, g, Xb, step)
    fx = directional(patch, lambda a, b: form.omega(a, b, Xb[: len(np.atleast_2d(a))]), x, g, Yb, step)
    return fy - fx - form.omega(x, g, patch.frame_bracket(X, Y))


def maurer_cartan_check(chi: ConnectionForm, samples: int = 50, seed: int = 0, tol: float = 1e-4,
                        sampler: Optional[Callable] = None, sign: int = MC_SIGN,
                        name: str = "maurer-cartan") -> CheckResult:
    """max |d chi(e_a, e_b) + sign [chi e_a, chi e_b]| over frame pairs and points.

    The residual under the opposite sign is recorded as a diagnostic.
    """
    rng = np.random.default_rng(seed)
    alg = chi.algebroid
    H = alg.fiber
    x, g = (sampler or alg.random_points)(rng, samples)
    eye = np.eye(alg.dim)
    pinned = other = 0.0
    for a, b in combinations(range(alg.dim), 2):
        d = exterior_derivative(chi, eye[a], eye[b], x, g)
        br = H.bracket(chi.omega(x, g, eye[a]), chi.omega(x, g, eye[b]))
        pinned = max(pinned, float(np.max(np.abs(d + sign * br), initial=0.0)))
        other = max(other, float(np.max(np.abs(d - sign * br), initial=0.0)))
    return CheckResult(name, pinned, tol, f"d chi {'+' if sign > 0 else '-'} [chi, chi] = 0",
                       {"mc_sign": sign, "opposite_sign_residual": other, "samples": len(x)})


def darboux_check(alpha: Callable, chi: ConnectionForm, samples: int = 50, seed: int = 0,
                  tol: float = 1e-5, sampler: Optional[Callable] = None, side: str = DARBOUX_SIDE,
                  name: str = "darboux") -> CheckResult:
    """Residual of the logarithmic derivative of alpha against ad o chi.

    ``side="right"`` tests X(alpha) alpha^-1, ``"left"`` tests
    alpha^-1 X(alpha).  The other side is reported as a diagnostic.
    """
    rng = np.random.default_rng(seed)
    alg = chi.algebroid
    patch = alg.patch
    H = alg.fiber
    x, g = (sampler or alg.random_points)(rng, samples)
    A = np.asarray(alpha(x, g), float)
    if np.max(np.linalg.cond(A)) > 1e12:
        raise SingularAlpha("alpha is numerically singular on the samples")
    Ainv = np.linalg.inv(A)
    res = {"right": 0.0, "left": 0.0}
    for a in range(alg.dim):
        v = np.zeros((len(x), alg.dim))
        v[:, a] = 1.0
        dA = _stencil(patch, lambda xx, gg: np.asarray(alpha(xx, gg), float), x, g, v)
        adchi = H.ad_matrix(chi.omega(x, g, v))
        res["right"] = max(res["right"], float(np.max(np.abs(dA @ Ainv - adchi), initial=0.0)))
        res["left"] = max(res["left"], float(np.max(np.abs(Ainv @ dA - adchi), initial=0.0)))
    other = "left" if side == "right" else "right"
    return CheckResult(name, res[side], tol, "Delta(alpha) = ad o chi",
                       {"darboux_side": side, f"{other}_side_residual": res[other], "samples": len(x)})


def alpha_checks(data: TransitionData, samples: int = 50, seed: int = 0, tol: float = 1e-8) -> CheckResult:
    """alpha_ij preserves the bracket and alpha_ij alpha_ji = id."""
    rng = np.random.default_rng(seed)
    H = data.action.H
    auto = inv = 0.0
    for (i, j), p in sorted(data.pairs.items()):
        x, g = p.sample(rng, samples)
        A = np.asarray(p.alpha(x, g), float)
        V, W = H.random_algebra(rng, len(x)), H.random_algebra(rng, len(x))
        lhs = np.einsum("nab,nb->na", A, H.bracket(V, W))
        rhs = H.bracket(np.einsum("nab,nb->na", A, V), np.einsum("nab,nb->na", A, W))
        auto = max(auto, float(np.max(np.abs(lhs - rhs), initial=0.0)))
        if (j, i) in data.pairs:
            q = data.pairs[(j, i)]
            xj, gj = data.bundle.change_chart(i, j, x, g)
            back = np.asarray(q.alpha(xj, gj), float)
            inv = max(inv, float(np.max(np.abs(A @ back - np.eye(H.d)), initial=0.0)))
    return merge("alpha-automorphism", {"bracket": auto, "inverse": inv}, tol,
                 "alpha_ij in Aut(h) and alpha_ij alpha_ji = id")


def cocycle_check(data: TransitionData, samples: int = 50, seed: int = 0, tol: float = 1e-5,
                  name: str = "cocycle") -> CheckResult:
    """chi_ik = chi_ij + alpha_ij(chi_jk) on sampled triple overlaps.

    Skipped when the data have no triple overlap.  The literal ordering
    chi_ij = chi_ik + alpha_ij(chi_jk) is reported as a diagnostic.
    """
    triples = data.triples()
    if not triples:
        return CheckResult(name, 0.0, tol, COCYCLE_FORM, skipped=True,
                           note="no triple overlaps in this atlas")
    rng = np.random.default_rng(seed)
    G = data.bundle.group
    worst = literal = 0.0
    for (i, j, k) in triples:
        x = data.bundle.sample_overlap(rng, samples, i, j, k)
        if len(x) == 0:
            continue
        g = G.random(rng, len(x))
        pij, pik, pjk = data.pair(i, j), data.pair(i, k), data.pair(j, k)
        v = rng.standard_normal((len(x), pij.algebroid.dim))
        xj, gj = data.bundle.change_chart(i, j, x, g)
        vj = pushforward(data.bundle, i, j, x, g, v)
        cij = pij.chi.omega(x, g, v)
        cik = pik.chi.omega(x, g, v)
        cjk = pjk.chi.omega(xj, gj, vj)
        acjk = np.einsum("nab,nb->na", np.asarray(pij.alpha(x, g), float), cjk)
        worst = max(worst, float(np.max(np.abs(cik - cij - acjk), initial=0.0)))
        literal = max(literal, float(np.max(np.abs(cij - cik - acjk), initial=0.0)))
    return CheckResult(name, worst, tol, COCYCLE_FORM,
                       {"triples": len(triples), "literal_order_residual": literal})


def equivariance_check(data: TransitionData, samples: int = 50, seed: int = 0, tol: float = 1e-5,
                       name: str = "transition-equivariance") -> CheckResult:
    """chi_ij(TR_g X) = chi_ij(X) . g and alpha_ij(u g) = alpha_ij(u) . g."""
    rng = np.random.default_rng(seed)
    act = data.action
    G = data.bundle.group
    r_chi = r_alpha = 0.0
    for (i, j), p in sorted(data.pairs.items()):
        patch = p.algebroid.patch
        x, h = p.sample(rng, samples)
        g = G.random(rng, len(x))
        v = rng.standard_normal((len(x), patch.dim))
        lhs = p.chi.omega(x, h @ g, patch.tangent_right_action(v, g))
        rhs = act.right(p.chi.omega(x, h, v), g)
        r_chi = max(r_chi, float(np.max(np.abs(lhs - rhs), initial=0.0)))
        A = np.asarray(p.alpha(x, h), float)
        Ag = np.asarray(p.alpha(x, h @ g), float)
        acted = act.star(G.inv(g)) @ A @ act.star(g)
        r_alpha = max(r_alpha, float(np.max(np.abs(Ag - acted), initial=0.0)))
    return merge(name, {"chi": r_chi, "alpha": r_alpha}, tol,
                 "chi(X g) = chi(X) g and alpha(u g) = alpha(u) g",
                 aut_action="(alpha.g)(V) = (alpha(V.g^-1)).g")


def transition_checks(data: TransitionData, samples: int = 30, seed: int = 0,
                      tolerances: Optional[dict] = None) -> List[CheckResult]:
    """Maurer-Cartan and Darboux on every pair, cocycle, equivariance."""
    tol = {"maurer-cartan": 1e-4, "darboux": 1e-5, "cocycle": 1e-5, "transition-equivariance": 1e-5}
    tol.update(tolerances or {})
    mc = [maurer_cartan_check(p.chi, samples, seed, tol["maurer-cartan"], p.sampler)
          for _, p in sorted(data.pairs.items())]
    dx = [darboux_check(p.alpha, p.chi, samples, seed, tol["darboux"], p.sampler)
          for _, p in sorted(data.pairs.items())]
    mc_r = max(r.residual for r in mc)
    dx_r = max(r.residual for r in dx)
    return [
        CheckResult("maurer-cartan", mc_r, tol["maurer-cartan"], mc[0].identity,
                    {"mc_sign": MC_SIGN, "pairs": len(mc),
                     "opposite_sign_residual": max(r.details["opposite_sign_residual"] for r in mc)}),
        CheckResult("darboux", dx_r, tol["darboux"], dx[0].identity,
                    {"darboux_side": DARBOUX_SIDE, "pairs": len(dx),
                     "left_side_residual": max(r.details.get("left_side_residual", 0.0) for r in dx)}),
        cocycle_check(data, samples, seed, tol["cocycle"]),
        equivariance_check(data, samples, seed, tol["transition-equivariance"]),
    ]


# ---------------------------------------------------------------- builders

def from_frames(bundle: ChartedBundle, action: FiberAction, frames: Sequence[Frame],
                pairs: Optional[Sequence[Tuple[int, int]]] = None, check: bool = True,
                label: str = "transition") -> TransitionData:
    """Transition data from one H-valued frame per chart.

    Each frame k_i must satisfy k_i(u g) = rho(g^-1)(k_i(u)) so that the
    flat connection -(dk_i) k_i^-1 and the chart Ad(k_i) are equivariant.
    """
    H = action.H
    algs = [TrivialPBGAlgebroid(bundle.patch(i), action) for i in range(len(bundle.charts))]
    if pairs is None:
        pairs = [(i, j) for i in range(len(bundle.charts)) for j in range(len(bundle.charts))
                 if i != j and bundle.has_overlap(i, j)]
    data = TransitionData(bundle, action, label=label)
    for (i, j) in pairs:
        alg = algs[i]
        kj = frame_in_chart(bundle, j, i, frames[j])
        th_i = flat_from_frame(alg, frames[i], f"theta[{i}]")
        th_j = flat_from_frame(alg, kj, f"theta[{j}]")
        sampler = _overlap_sampler(bundle, i, j)
        data.pairs[(i, j)] = build_from_flats(th_i, th_j, lab_chart_from_frame(H, frames[i]),
                                              lab_chart_from_frame(H, kj), i, j, sampler, check=check)
    return data


def hopf_frame(bundle: HopfBundle, i: int) -> Frame:
    """k_i(u) = iota(z_i(u))^-1 u, with z_i the chart-i fiber coordinate."""
    def k(x, g):
        z = np.asarray(g, dtype=complex)[..., 0, 0]
        e = lg.u1_in_su2(z)
        return np.conj(np.swapaxes(e, -1, -2)) @ bundle.section(i, x) @ e
    return k


def hopf_transition_data(check: bool = True) -> TransitionData:
    """Two-chart data on the Hopf bundle with H = SU(2), G = U(1) acting by conjugation."""
    bundle = build_hopf()
    act = conjugation(bundle.group, lg.su2(), circle_in_su2, name="conj[U1->SU2]")
    frames = [hopf_frame(bundle, 0), hopf_frame(bundle, 1)]
    return from_frames(bundle, act, frames, check=check, label="hopf")


_THREE_CHART_POLYS = (
    ("0.3*x + 0.2*y^2", "0.5*y - 0.1*x*y", "0.2*x^2"),
    ("-0.4*y + 0.3*x*y", "0.2*x + 0.1*y^2", "0.4*y"),
    ("0.1*x*y", "-0.3*x^2 + 0.2", "0.3*x - 0.2*y"),
)


def three_chart_bundle() -> ChartedBundle:
    dom = Domain.box([[-1.0, 1.0], [-1.0, 1.0]])
    charts = [Chart(n, ("x", "y"), dom) for n in ("A", "B", "C")]
    G = lg.u1()
    one = lambda x: G.identity((np.atleast_2d(x).shape[0],))
    overlaps = [Overlap(i, j, one) for i in range(3) for j in range(3) if i < j]
    return ChartedBundle(G, charts, overlaps, name="three-chart")


def three_chart_transition_data(check: bool = True) -> TransitionData:
    """Synthetic data on three charts of R^2 x U(1), H = SU(2) with trivial action.

    Chart i carries the frame k_i = exp(p1 E1) exp(p2 E2) exp(p3 E3) for
    fixed polynomials p.  Every pair of charts overlaps on the whole box.
    """
    bundle = three_chart_bundle()
    H = lg.su2()
    act = trivial_action(bundle.group, H)
    frames = []
    for polys in _THREE_CHART_POLYS:
        comp = [Compiled(p) for p in polys]

        def k(x, g, comp=comp):
            x = np.atleast_2d(np.asarray(x, float))
            env = {"x": x[:, 0], "y": x[:, 1]}
            out = H.identity((x.shape[0],))
            for a, c in enumerate(comp):
                coef = np.zeros((x.shape[0], 3))
                coef[:, a] = c(env)
                out = out @ H.exp(coef)
            return out
        frames.append(k)
    return from_frames(bundle, act, frames, check=check, label="three-chart")


BUILDERS = {"hopf": hopf_transition_data, "three-chart": three_chart_transition_data}


def from_json(obj: dict, bundle: ChartedBundle, action: FiberAction) -> TransitionData:
    """Either {"builder": name} or explicit DSL pairs.

    Explicit layout: {"pairs": [{"i": ..., "j": ..., "chi": k x (n+d) table,
    "alpha": k x k table}, ...]} with DSL in the chart-i variables.
    """
    if "builder" in obj:
        name = obj["builder"]
        if name not in BUILDERS:
            raise TransitionError(f"unknown transition builder {name!r}")
        return BUILDERS[name]()
    names = [c.name for c in bundle.charts]

    def index(ref):
        if isinstance(ref, int):
            return ref
        if ref not in names:
            raise TransitionError(f"unknown chart {ref!r}")
        return names.index(ref)

    data = TransitionData(bundle, action, label=obj.get("name", "transition"))
    for p in obj.get("pairs", []):
        i, j = index(p["i"]), index(p["j"])
        alg = TrivialPBGAlgebroid(bundle.patch(i), action)
        chi = ConnectionForm.from_exprs(alg, p["chi"], label=f"chi[{i}{j}]")
        k = alg.k
        rows = p["alpha"]
        if len(rows) != k or any(len(r) != k for r in rows):
            raise TransitionError(f"alpha must be {k}x{k}")
        comp = [[Compiled(e) for e in r] for r in rows]
        patch = alg.patch

        def alpha(x, g, comp=comp, patch=patch, k=k):
            env = patch.env(np.atleast_2d(x), g)
            N = np.atleast_2d(x).shape[0]
            out = np.zeros((N, k, k))
            for a in range(k):
                for b in range(k):
                    out[:, a, b] = comp[a][b](env)
            return out
        sampler = _overlap_sampler(bundle, i, j) if i != j else (lambda rng, n, a=alg: a.random_points(rng, n))
        data.pairs[(i, j)] = TransitionPair(i, j, chi, alpha, sampler)
    return data
