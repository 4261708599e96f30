"""Registry of named checks and the context that builds their inputs.

Each entry maps a stable public name to a runner taking the experiment
context, the per-check parameters, an integer seed and a tolerance.  The
``needs`` tuple lists the spec blocks that must be present.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import action as act_mod
from . import connection as cn
from . import groupoid as gp
from . import holonomy as hol
from . import hopf
from . import liegroup as lg
from . import transition as tr
from .algebroid import TrivialPBGAlgebroid, algebroid_laws, bracket_equivariance_check
from .bundle import ChartedBundle, bundle_from_json
from .result import CheckResult, merge


class SpecError(ValueError):
    """A semantic problem in an experiment file, located by a JSON pointer."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


def check_seed(seed: int, name: str, index: int) -> int:
    """Seed for one check: depends on the global seed, its name and its slot."""
    return (int(seed) * 1_000_003 + zlib.crc32(name.encode()) + 7919 * index) % (2 ** 32)


# ---------------------------------------------------------------- context

def group_from_json(obj) -> lg.MatrixLieGroup:
    if isinstance(obj, str):
        return lg.builtin(obj)
    if "builtin" in obj:
        return lg.builtin(obj["builtin"])
    return lg.from_basis_pairs(obj["name"], obj["basis"], obj.get("family", "none"),
                               bool(obj.get("special", False)))


class Context:
    """Lazily built objects shared by the checks of one experiment."""

    def __init__(self, spec: dict):
        self.spec = spec
        self._cache: Dict[object, object] = {}
        self.group = group_from_json(spec["group"]) if "group" in spec else None
        fiber = spec.get("fiber")
        self.fiber = group_from_json(fiber) if fiber is not None else self.group
        self.bundle: Optional[ChartedBundle] = None
        if "bundle" in spec:
            self.bundle = bundle_from_json(spec["bundle"], self.group)
        self.action = None
        if "action" in spec:
            self.action = act_mod.from_json(spec["action"], self.group, self.fiber)

    def _memo(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def chart_index(self, ref) -> int:
        if ref is None:
            return 0
        if isinstance(ref, int):
            return ref
        return [c.name for c in self.bundle.charts].index(ref)

    def algebroid(self, chart=None) -> TrivialPBGAlgebroid:
        i = self.chart_index(chart)
        return self._memo(("alg", i), lambda: TrivialPBGAlgebroid(self.bundle.patch(i), self.action))

    def principal_algebroid(self, chart=None) -> TrivialPBGAlgebroid:
        i = self.chart_index(chart)
        return self._memo(("palg", i), lambda: TrivialPBGAlgebroid(
            self.bundle.patch(i), act_mod.adjoint(self.group)))

    def connection_names(self) -> List[str]:
        return list(self.spec.get("connections", {}))

    def connection(self, name: Optional[str] = None) -> cn.ConnectionForm:
        if name is None:
            name = self.connection_names()[0]
        return self._memo(("conn", name), lambda: self._build_connection(name))

    def _build_connection(self, name: str) -> cn.ConnectionForm:
        obj = self.spec["connections"][name]
        alg = self.algebroid(obj.get("chart"))
        if obj.get("flat"):
            return cn.standard_flat(alg)
        form = cn.ConnectionForm.from_exprs(alg, obj["omega"], obj.get("extension", "literal"), label=name)
        return form

    def delta(self, name: str) -> cn.ConnectionForm:
        """A principal (g-valued, Ad-equivariant) connection from the spec or a default."""
        def build():
            if name == "product":
                alg = self.principal_algebroid()
                return cn.ConnectionForm.from_exprs(alg, _principal_table(alg, 0.0), "equivariant", "product")
            if name == "twisted":
                alg = self.principal_algebroid()
                return cn.ConnectionForm.from_exprs(alg, _principal_table(alg, 0.5), "equivariant", "twisted")
            obj = self.spec["connections"][name]
            alg = self.principal_algebroid(obj.get("chart"))
            return cn.ConnectionForm.from_exprs(alg, obj["omega"], "equivariant", label=name)
        return self._memo(("delta", name), build)

    def transition(self, builder: Optional[str] = None) -> tr.TransitionData:
        if builder is not None:
            return self._memo(("tr", builder), tr.BUILDERS[builder])
        return self._memo(("tr", None), lambda: tr.from_json(self.spec["transition"], self.bundle, self.action))

    def groupoid(self) -> gp.TrivialPBGGroupoid:
        return self._memo("gpd", lambda: gp.TrivialPBGGroupoid(self.bundle, self.action))


def _principal_table(alg: TrivialPBGAlgebroid, scale: float) -> List[List[str]]:
    """k x (n + d) table [A(x) | I] with A(x)_{ka} = scale * x_a on a checkerboard."""
    vars = alg.patch.vars
    rows = []
    for k in range(alg.k):
        base = [f"{scale}*{v}" if scale and (k + a) % 2 == 0 else "0" for a, v in enumerate(vars)]
        rows.append(base + ["1" if c == k else "0" for c in range(alg.k)])
    return rows


# ---------------------------------------------------------------- runners

@dataclass(frozen=True)
class CheckSpec:
    name: str
    run: Callable[..., CheckResult]
    needs: Tuple[str, ...]
    tolerance: float
    identity: str
    params: Tuple[str, ...] = ()


def _samples(p: dict, default: int) -> int:
    return int(p.get("samples", default))


def _run_algebroid_laws(ctx, p, seed, tol):
    return algebroid_laws(ctx.algebroid(p.get("chart")), int(p.get("sections", 50)), seed, tol)


def _run_bracket_equivariance(ctx, p, seed, tol):
    return bracket_equivariance_check(ctx.algebroid(p.get("chart")), _samples(p, 10), seed, tol=tol)


def _run_isometablic(ctx, p, seed, tol):
    return cn.isometablic_check(ctx.connection(p.get("connection")), _samples(p, 100), seed, tol)


def _run_curvature_equivariance(ctx, p, seed, tol):
    return cn.curvature_equivariance_check(ctx.connection(p.get("connection")), _samples(p, 100), seed, tol)


def _run_curvature_consistency(ctx, p, seed, tol):
    return cn.curvature_checks(ctx.connection(p.get("connection")), _samples(p, 20), seed, tol)


def _run_back_connection(ctx, p, seed, tol):
    r = cn.back_connection(ctx.connection(p.get("connection"))).check(samples=_samples(p, 50), seed=seed)
    return CheckResult("back-connection", r.residual, tol, r.identity, r.details)


def _run_adjoint_equivariance(ctx, p, seed, tol):
    return cn.adjoint_equivariance_check(ctx.connection(p.get("connection")), _samples(p, 50), seed, tol)


def _run_adjoint_derivation(ctx, p, seed, tol):
    return cn.derivation_check(ctx.connection(p.get("connection")), _samples(p, 50), seed, tol)


def _run_bianchi(ctx, p, seed, tol):
    return cn.bianchi_check(ctx.connection(p.get("connection")), _samples(p, 100), seed, tol)


def _run_quotient(ctx, p, seed, tol):
    deltas = [ctx.delta(name) for name in p.get("deltas", ["product", "twisted"])]
    return cn.quotient_roundtrip(ctx.connection(p.get("connection")), deltas, _samples(p, 100), seed, tol)


def _transition_pairs(ctx, p):
    data = ctx.transition(p.get("builder"))
    return data, [pair for _, pair in sorted(data.pairs.items())]


def _run_maurer_cartan(ctx, p, seed, tol):
    data, pairs = _transition_pairs(ctx, p)
    rs = [tr.maurer_cartan_check(q.chi, _samples(p, 30), seed, tol, q.sampler) for q in pairs]
    return merge("maurer-cartan", {f"{q.i}{q.j}": r.residual for q, r in zip(pairs, rs)}, tol,
                 rs[0].identity, mc_sign=tr.MC_SIGN, transition=data.label,
                 opposite_sign_residual=max(r.details["opposite_sign_residual"] for r in rs))


def _run_darboux(ctx, p, seed, tol):
    data, pairs = _transition_pairs(ctx, p)
    rs = [tr.darboux_check(q.alpha, q.chi, _samples(p, 30), seed, tol, q.sampler) for q in pairs]
    return merge("darboux", {f"{q.i}{q.j}": r.residual for q, r in zip(pairs, rs)}, tol,
                 rs[0].identity, darboux_side=tr.DARBOUX_SIDE, transition=data.label,
                 left_side_residual=max(r.details.get("left_side_residual", 0.0) for r in rs))


def _run_cocycle(ctx, p, seed, tol):
    data, _ = _transition_pairs(ctx, p)
    r = tr.cocycle_check(data, _samples(p, 30), seed, tol)
    r.details.setdefault("transition", data.label)
    return r


def _run_transition_equivariance(ctx, p, seed, tol):
    data, _ = _transition_pairs(ctx, p)
    r = tr.equivariance_check(data, _samples(p, 30), seed, tol)
    r.details.setdefault("transition", data.label)
    return r


def _run_alpha(ctx, p, seed, tol):
    data, _ = _transition_pairs(ctx, p)
    r = tr.alpha_checks(data, _samples(p, 30), seed, tol)
    r.name = "alpha-automorphism"
    return r


def _run_lift_axioms(ctx, p, seed, tol):
    return hol.lift_properties_check(ctx.connection(p.get("connection")), seed=seed,
                                     steps=int(p.get("steps", ctx.spec.get("steps", 1024))),
                                     size=int(p.get("paths", 6)), tol=tol)


def _run_rk4(ctx, p, seed, tol):
    r = hol.convergence_check(ctx.connection(p.get("connection")), seed=seed, min_ratio=1.0 / tol)
    return r


# logs are reported only for ||h - I|| below this; beyond it -I is too close
LOG_GUARD = 1.9


def _loop_base(ctx, gamma, loop: dict):
    patch = gamma.patch
    if "base" in loop:
        x0 = np.asarray(loop["base"], dtype=float)
    elif "corner" in loop:
        x0 = np.asarray(loop["corner"], dtype=float)
    elif loop.get("kind") == "param":
        x0 = hol.param_path(patch, loop["coords"]).start()[0][0]
    else:
        x0 = patch.chart.domain.mid
    return x0, patch.group.identity()


def loop_result(ctx, gamma, loop: dict, steps: int) -> dict:
    """Holonomy matrix and, within the log guard, its log coordinates."""
    x0, g0 = _loop_base(ctx, gamma, loop)
    h = hol.loop_holonomy(gamma, x0, g0, loop, steps)
    H = gamma.algebroid.fiber
    out = {"matrix": h, "log": None}
    try:
        out["log"] = H.log(h[None], radius=LOG_GUARD)[0]
    except lg.OutOfInjectivityRadius:
        pass
    return out


def _run_loop_holonomy(ctx, p, seed, tol):
    gamma = ctx.connection(p.get("connection"))
    loops = ctx.spec["loops"]
    steps = int(p.get("steps", ctx.spec.get("steps", 1024)))
    parts, logs = {}, []
    for k, loop in enumerate(loops):
        res = loop_result(ctx, gamma, loop, steps)
        log = res["log"]
        logs.append(None if log is None else log.tolist())
        if "expect_log" in loop:
            parts[f"loop{k}"] = (float(np.max(np.abs(log - np.asarray(loop["expect_log"]))))
                                 if log is not None else float("inf"))
        if "expect_log_norm" in loop:
            parts[f"loop{k}-norm"] = (abs(float(np.linalg.norm(log)) - loop["expect_log_norm"])
                                      if log is not None else float("inf"))
    return merge("loop-holonomy", parts, tol, "holonomy of each loop against its expected log",
                 logs=logs, log_norms=[None if v is None else float(np.linalg.norm(v)) for v in logs],
                 steps=steps)


def _run_ambrose_singer(ctx, p, seed, tol):
    gamma = ctx.connection(p.get("connection"))
    x0 = p.get("base")
    return hol.ambrose_singer_check(gamma, None if x0 is None else np.asarray(x0, float), seed=seed,
                                    steps=int(p.get("steps", 256)), tol=tol,
                                    expected_dim=p.get("expected_dim"))


def _run_bundle_cocycle(ctx, p, seed, tol):
    d = ctx.bundle.cocycle_check(samples=_samples(p, 200), seed=seed)
    parts = {k: d[k] for k in ("identity", "inverse", "triple", "membership")}
    return merge("bundle-cocycle", parts, tol, "g_ii = e, g_ij g_ji = e, g_ij g_jk = g_ik",
                 triples_checked=d["triples_checked"])


def _run_fiber_invariance(ctx, p, seed, tol):
    return hopf.fiber_invariance_check(_samples(p, 1000), seed, tol)


def _run_su2_so3(ctx, p, seed, tol):
    return hopf.su2_so3_homomorphism_check(_samples(p, 100), seed, tol)


def _run_u1_so2(ctx, p, seed, tol):
    return hopf.u1_so2_kernel_check(samples=_samples(p, 1000), seed=seed, tol=tol)


def _run_gauge_iso(ctx, p, seed, tol):
    return gp.gauge_iso_check(_samples(p, 100), seed, p.get("subgroup", "Z2"), tol)


def _run_pbg_axioms(ctx, p, seed, tol):
    return gp.pbg_axioms_check(ctx.groupoid(), _samples(p, 100), seed, tol)


def _run_groupoid_laws(ctx, p, seed, tol):
    return gp.groupoid_laws_check(ctx.groupoid(), _samples(p, 50), seed, tol)


def _run_frame_action(ctx, p, seed, tol):
    return gp.frame_action_check(ctx.action, _samples(p, 50), seed, tol)


def _run_local_sections(ctx, p, seed, tol):
    ls = gp.hopf_local_sections(steps=int(p.get("steps", 256)), seed=seed)
    r = ls.check(samples=_samples(p, 20), seed=seed)
    return CheckResult("local-sections", r.residual, tol, r.identity, r.details)


_C = CheckSpec
REGISTRY: Dict[str, CheckSpec] = {c.name: c for c in [
    _C("algebroid-laws", _run_algebroid_laws, ("bundle", "action"), 1e-5,
       "Jacobi, Leibniz and anchor morphism for the trivial bracket", ("sections", "chart")),
    _C("bracket-equivariance", _run_bracket_equivariance, ("bundle", "action"), 1e-6,
       "R_g [s1, s2] = [R_g s1, R_g s2]", ("samples", "chart")),
    _C("isometablic", _run_isometablic, ("connections",), 1e-5,
       "omega(TR_g X) = rho_*(g^-1) omega(X)", ("samples", "connection")),
    _C("curvature-equivariance", _run_curvature_equivariance, ("connections",), 1e-5,
       "Omega(TR_g X, TR_g Y) = rho_*(g^-1) Omega(X, Y)", ("samples", "connection")),
    _C("curvature-consistency", _run_curvature_consistency, ("connections",), 1e-5,
       "bracket curvature = -(d omega + [omega, omega]), antisymmetric, vertical-free",
       ("samples", "connection")),
    _C("back-connection", _run_back_connection, ("connections",), 1e-10,
       "the back-connection is a Lie algebroid morphism on the vertical part", ("samples", "connection")),
    _C("adjoint-equivariance", _run_adjoint_equivariance, ("connections",), 1e-5,
       "nabla_{TR_g X}(R_g V) = R_g nabla_X V", ("samples", "connection")),
    _C("adjoint-derivation", _run_adjoint_derivation, ("connections",), 1e-5,
       "nabla_X [V, W] = [nabla_X V, W] + [V, nabla_X W]", ("samples", "connection")),
    _C("bianchi", _run_bianchi, ("connections",), 1e-4,
       "cyclic sum of nabla_X Omega(Y, Z) - Omega([X, Y], Z) vanishes", ("samples", "connection")),
    _C("quotient-roundtrip", _run_quotient, ("connections",), 1e-6,
       "gamma -> quotient section -> gamma, independent of the principal connection",
       ("samples", "connection", "deltas")),
    _C("maurer-cartan", _run_maurer_cartan, ("transition",), 1e-4,
       "d chi - [chi, chi] = 0", ("samples", "builder")),
    _C("darboux", _run_darboux, ("transition",), 1e-5,
       "X(alpha) alpha^-1 = ad chi(X)", ("samples", "builder")),
    _C("cocycle", _run_cocycle, ("transition",), 1e-5,
       "chi_ik = chi_ij + alpha_ij(chi_jk), alpha_ik = alpha_ij alpha_jk", ("samples", "builder")),
    _C("transition-equivariance", _run_transition_equivariance, ("transition",), 1e-5,
       "chi and alpha are equivariant under the structure group", ("samples", "builder")),
    _C("alpha-automorphism", _run_alpha, ("transition",), 1e-8,
       "alpha_ij is a Lie algebra automorphism with alpha_ii = id", ("samples", "builder")),
    _C("lift-axioms", _run_lift_axioms, ("connections",), 1e-5,
       "constant, inverse, concatenation, reparametrization, additivity, equivariance of lifts",
       ("steps", "paths", "connection")),
    _C("rk4-convergence", _run_rk4, ("connections",), 1.0 / 8.0,
       "halving the step cuts the lift error by at least 8", ("connection",)),
    _C("loop-holonomy", _run_loop_holonomy, ("connections", "loops"), 1e-6,
       "holonomy of each loop against its expected log", ("steps", "connection")),
    _C("ambrose-singer", _run_ambrose_singer, ("connections",), 1e-3,
       "holonomy algebra = curvature-generated sub-LAB",
       ("steps", "connection", "expected_dim", "base")),
    _C("bundle-cocycle", _run_bundle_cocycle, ("bundle",), 1e-8,
       "g_ii = e, g_ij g_ji = e, g_ij g_jk = g_ik", ("samples",)),
    _C("hopf-fiber-invariance", _run_fiber_invariance, (), 1e-12, "p(q z) = p(q)", ("samples",)),
    _C("su2-so3-homomorphism", _run_su2_so3, (), 1e-10, "phi(q1 q2) = phi(q1) phi(q2)", ("samples",)),
    _C("u1-so2-kernel", _run_u1_so2, (), 1e-12, "ker(U1 -> SO2) = {+1, -1}", ("samples",)),
    _C("gauge-action-iso", _run_gauge_iso, (), 1e-10,
       "gauge groupoid of Q(P/K, G/K) matches the action groupoid", ("samples", "subgroup")),
    _C("pbg-axioms", _run_pbg_axioms, ("bundle", "action"), 1e-10,
       "the groupoid action is free, compatible with composition and the projection", ("samples",)),
    _C("groupoid-laws", _run_groupoid_laws, ("bundle", "action"), 1e-10,
       "associativity, units and inverses", ("samples",)),
    _C("frame-action", _run_frame_action, ("bundle", "action"), 1e-10,
       "(xi . g) is a right action through Lie algebra automorphisms", ("samples",)),
    _C("local-sections", _run_local_sections, ("hopf",), 1e-6,
       "psi_i(ug, rho_i(g^-1) h) = psi_i(u, h) g on the Hopf bundle", ("samples", "steps")),
]}

TRANSITION_CHECKS = {"maurer-cartan", "darboux", "cocycle", "transition-equivariance", "alpha-automorphism"}


def requirements_met(spec: dict, name: str, params: dict) -> Optional[str]:
    """None when the spec carries every block the check needs, else a reason."""
    for block in REGISTRY[name].needs:
        if block == "transition" and params.get("builder") is not None:
            continue
        if block == "hopf":
            if spec.get("bundle", {}).get("kind") != "hopf":
                return "needs the Hopf bundle"
            continue
        if block not in spec:
            return f"needs a {block!r} block"
    return None
