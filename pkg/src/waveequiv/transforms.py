"""Closed-form one-parameter transformations and their numeric exponentiation.

Four map families keep the wave family invariant; each shifts one base
coordinate by a multiple of an arbitrary function and drags the jets and
the fluxes along (the flux maps are the Piola transforms of the balance
form, which is why the equation residual picks up exactly a factor of the
coordinate Jacobian determinant):

* family 4.1: xbar = x - eps*m(u)
* family 4.2: xbar = x - eps*m(u), ybar = y - eps*p(u)
* family 4.3: xbar = x - eps*m(u, y)
* family 4.4: ybar = y - eps*m(u, x)

Every family satisfies the one-parameter group law exactly, is the
identity at eps = 0, and agrees with RK4 integration of the generator
flow (d xbar_i/d eps = -xi_i, d ubar/d eps = eta, jets with zeta, fluxes
with mu and H).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
import sympy as sp

from .expr import (
    CHART, EPS, T, U, V1, V2, V3, X, Y,
    Expr, ExprError, DomainError, NumericFunction, compile_fast, formal_function,
    is_zero, normalize, to_text,
)
from .family import FamilyMember, is_linear
from .generators import (
    SLOT_F, SLOT_G, SLOT_H, FreeData, GeneratorSet, build_general, solve_wave_determining,
)

_STATE = (X, Y, T, U, V1, V2, V3, SLOT_F, SLOT_G, SLOT_H)
_STATE_NAMES = ("x", "y", "t", "u", "v1", "v2", "v3", "f", "g", "h")

FAMILIES = ("4.1", "4.2", "4.3", "4.4")


@dataclass(frozen=True)
class PointTransformation:
    """One-parameter point transformation with induced jet and flux maps.

    Base maps are expressions in (x, y, t, u, eps); jet maps add the jet
    coordinates; flux maps are written on the flux slots f, g, h.  The maps
    are valid where every entry of ``denominators`` is nonzero.
    """

    family: str
    xbar: Expr
    ybar: Expr
    tbar: Expr
    ubar: Expr
    v1bar: Expr
    v2bar: Expr
    v3bar: Expr
    fbar: Expr
    gbar: Expr
    hbar: Expr
    denominators: tuple[Expr, ...]
    generator: GeneratorSet
    function_names: tuple[tuple[str, int], ...]

    @property
    def base_maps(self) -> dict:
        return {X: self.xbar, Y: self.ybar, T: self.tbar, U: self.ubar}

    @property
    def jet_maps(self) -> dict:
        return {V1: self.v1bar, V2: self.v2bar, V3: self.v3bar}

    @property
    def flux_maps(self) -> dict:
        return {SLOT_F: self.fbar, SLOT_G: self.gbar, SLOT_H: self.hbar}

    def all_maps(self) -> dict:
        return {**self.base_maps, **self.jet_maps, **self.flux_maps}

    def at(self, eps_value) -> "PointTransformation":
        """Substitute a value (or expression) for the group parameter."""
        sub = {EPS: sp.sympify(eps_value)}
        kw = {name: getattr(self, name).subs(sub)
              for name in ("xbar", "ybar", "tbar", "ubar", "v1bar", "v2bar", "v3bar",
                           "fbar", "gbar", "hbar")}
        return PointTransformation(
            family=self.family, denominators=tuple(d.subs(sub) for d in self.denominators),
            generator=self.generator, function_names=self.function_names, **kw)

    def inverse_substitution(self) -> dict:
        """Old coordinates in terms of new ones: the eps -> -eps maps."""
        sub = {EPS: -EPS}
        out = {s: e.subs(sub) for s, e in self.base_maps.items() if e != s}
        out.update({s: e.subs(sub) for s, e in self.jet_maps.items() if e != s})
        return out

    def as_dict(self) -> dict:
        return {name: to_text(getattr(self, attr)) for name, attr in (
            ("xbar", "xbar"), ("ybar", "ybar"), ("tbar", "tbar"), ("ubar", "ubar"),
            ("v1bar", "v1bar"), ("v2bar", "v2bar"), ("v3bar", "v3bar"),
            ("fbar", "fbar"), ("gbar", "gbar"), ("hbar", "hbar"))}


def _solved(fd: FreeData) -> GeneratorSet:
    return solve_wave_determining(build_general(fd))


def make_transform_4_1(fn_name: str = "m") -> PointTransformation:
    """Shift x by eps*m(u)."""
    m = formal_function(fn_name, 1)
    md = formal_function(fn_name, 1, (1,))
    D = 1 - EPS * md(U) * V1
    gs = _solved(FreeData(phi1=m(U)))
    return PointTransformation(
        family="4.1",
        xbar=X - EPS * m(U), ybar=Y, tbar=T, ubar=U,
        v1bar=V1 / D, v2bar=V2 / D, v3bar=V3 / D,
        fbar=SLOT_F - EPS * md(U) * (SLOT_G * V2 - V3**2) / D,
        gbar=SLOT_G / D, hbar=SLOT_H / D,
        denominators=(D,), generator=gs, function_names=((fn_name, 1),),
    )


def make_transform_4_2(m_name: str = "m", p_name: str = "p") -> PointTransformation:
    """Shift x by eps*m(u) and y by eps*p(u)."""
    m = formal_function(m_name, 1)
    md = formal_function(m_name, 1, (1,))
    p = formal_function(p_name, 1)
    pd = formal_function(p_name, 1, (1,))
    D = 1 - EPS * (md(U) * V1 + pd(U) * V2)
    gs = _solved(FreeData(phi1=m(U), phi2=p(U)))
    return PointTransformation(
        family="4.2",
        xbar=X - EPS * m(U), ybar=Y - EPS * p(U), tbar=T, ubar=U,
        v1bar=V1 / D, v2bar=V2 / D, v3bar=V3 / D,
        fbar=((1 - EPS * md(U) * V1) * SLOT_F - EPS * md(U) * (V2 * SLOT_G - V3**2)) / D,
        gbar=((1 - EPS * pd(U) * V2) * SLOT_G - EPS * pd(U) * (V1 * SLOT_F - V3**2)) / D,
        hbar=SLOT_H / D,
        denominators=(D,), generator=gs, function_names=((m_name, 1), (p_name, 1)),
    )


def make_transform_4_3(fn_name: str = "m") -> PointTransformation:
    """Shift x by eps*m(u, y)."""
    m = formal_function(fn_name, 2)
    mu = formal_function(fn_name, 2, (1, 0))(U, Y)
    my = formal_function(fn_name, 2, (0, 1))(U, Y)
    D = 1 - EPS * mu * V1
    gs = _solved(FreeData(phi1=m(U, Y)))
    return PointTransformation(
        family="4.3",
        xbar=X - EPS * m(U, Y), ybar=Y, tbar=T, ubar=U,
        v1bar=V1 / D, v2bar=(V2 + EPS * my * V1) / D, v3bar=V3 / D,
        fbar=SLOT_F - EPS * ((my + mu * V2) * SLOT_G - mu * V3**2) / D,
        gbar=SLOT_G / D, hbar=SLOT_H / D,
        denominators=(D,), generator=gs, function_names=((fn_name, 2),),
    )


def make_transform_4_4(fn_name: str = "m") -> PointTransformation:
    """Shift y by eps*m(u, x)."""
    m = formal_function(fn_name, 2)
    mu = formal_function(fn_name, 2, (1, 0))(U, X)
    mx = formal_function(fn_name, 2, (0, 1))(U, X)
    D = 1 - EPS * mu * V2
    gs = _solved(FreeData(phi2=m(U, X)))
    return PointTransformation(
        family="4.4",
        xbar=X, ybar=Y - EPS * m(U, X), tbar=T, ubar=U,
        v1bar=(V1 + EPS * mx * V2) / D, v2bar=V2 / D, v3bar=V3 / D,
        fbar=SLOT_F / D,
        gbar=SLOT_G - EPS * ((mx + mu * V1) * SLOT_F - mu * V3**2) / D,
        hbar=SLOT_H / D,
        denominators=(D,), generator=gs, function_names=((fn_name, 2),),
    )


_MAKERS = {"4.1": make_transform_4_1, "4.2": make_transform_4_2,
           "4.3": make_transform_4_3, "4.4": make_transform_4_4}


def make_transform(family: str, **kw) -> PointTransformation:
    try:
        maker = _MAKERS[family]
    except KeyError:
        raise ExprError(f"unknown transform family {family!r}; known: {', '.join(FAMILIES)}")
    return maker(**kw)


# ---------------------------------------------------------------------------
# jet-map certificate

class JetMapMismatch(ExprError):
    def __init__(self, residuals):
        self.residuals = residuals
        parts = ", ".join(f"{name}: {to_text(r)}" for name, r in residuals)
        super().__init__(f"stored jet maps disagree with the chain rule ({parts})")


def _dhat(e: Expr, axis_index: int) -> Expr:
    base = (X, Y, T)[axis_index]
    jet = (V1, V2, V3)[axis_index]
    return sp.diff(e, base) + jet * sp.diff(e, U)


def induced_jet_map(pt: PointTransformation) -> tuple[Expr, Expr, Expr]:
    """Recompute the jet maps from the base maps via the chain rule.

    Solves sum_i vbar_i * D_j(xbar_i) = D_j(ubar) for (vbar_1..3) and checks
    the result against the stored maps; a mismatch raises JetMapMismatch.
    """
    bases = (pt.xbar, pt.ybar, pt.tbar)
    M = sp.Matrix(3, 3, lambda j, i: _dhat(bases[i], j))
    rhs = sp.Matrix(3, 1, lambda j, _: _dhat(pt.ubar, j))
    sol = M.LUsolve(rhs)
    recomputed = tuple(normalize(sol[i]) for i in range(3))
    stored = (pt.v1bar, pt.v2bar, pt.v3bar)
    residuals = []
    for name, rec, sto in zip(("v1bar", "v2bar", "v3bar"), recomputed, stored):
        diff = normalize(rec - sto)
        if diff != 0:
            residuals.append((name, diff))
    if residuals:
        raise JetMapMismatch(residuals)
    return recomputed


def jacobian_determinant(pt: PointTransformation) -> Expr:
    """det of the on-surface Jacobian d(xbar_i)/d(x_j); the residual of the
    transformed equation is the original residual divided by this factor."""
    bases = (pt.xbar, pt.ybar, pt.tbar)
    M = sp.Matrix(3, 3, lambda i, j: _dhat(bases[i], j))
    return normalize(M.det())


# ---------------------------------------------------------------------------
# member push-forward

def transform_member(m: FamilyMember, pt: PointTransformation) -> FamilyMember:
    """Push a member through the transformation.

    The flux maps are evaluated on the member and every old coordinate is
    rewritten through the inverse maps, so the result is the transformed
    member as a function of the (renamed) new coordinates, normalized.
    """
    slots = {SLOT_F: m.f, SLOT_G: m.g, SLOT_H: m.h}
    inv = pt.inverse_substitution()
    out = []
    for fmap in (pt.fbar, pt.gbar, pt.hbar):
        e = fmap.subs(slots, simultaneous=True)
        e = e.subs(inv, simultaneous=True)
        out.append(normalize(e))
    return FamilyMember(*out)


# ---------------------------------------------------------------------------
# group law

def group_law_residuals(pt: PointTransformation) -> dict[str, Expr]:
    """Normalized residuals of compose(eps1, eps2) == map(eps1 + eps2)."""
    e1, e2 = sp.symbols("veps1 veps2")
    first = {s: e.subs(EPS, e1) for s, e in pt.all_maps().items()}
    residuals = {}
    for name, s in (("xbar", X), ("ybar", Y), ("tbar", T), ("ubar", U),
                    ("v1bar", V1), ("v2bar", V2), ("v3bar", V3),
                    ("fbar", SLOT_F), ("gbar", SLOT_G), ("hbar", SLOT_H)):
        second = pt.all_maps()[s].subs(EPS, e2).subs(first, simultaneous=True)
        target = pt.all_maps()[s].subs(EPS, e1 + e2)
        residuals[name] = normalize(second - target)
    return residuals


# ---------------------------------------------------------------------------
# Lie flow

@dataclass(frozen=True)
class LieSystem:
    """Autonomous flow in (x, y, t, u, v1, v2, v3, f, g, h).

    ``rhs`` maps each state name to its d/d(eps) expression over the state
    symbols.  The t right-hand side may depend on t only.
    """

    rhs: Mapping[str, Expr]
    functions: Mapping[str, NumericFunction]

    def __post_init__(self):
        rt = sp.sympify(self.rhs["t"])
        extra = rt.free_symbols - {T}
        if extra:
            raise ExprError(f"the t flow may depend on t only; found {sorted(map(str, extra))}")


class LieFlowError(ArithmeticError):
    def __init__(self, message: str, eps_reached: float):
        super().__init__(f"{message} (flow parameter reached {eps_reached:.6g})")
        self.eps_reached = eps_reached


def lie_system(gs: GeneratorSet, functions: Mapping[str, NumericFunction]) -> LieSystem:
    """Flow of an admissible generator set.

    The local coordinates flow against the stored coefficients
    (d xbar_i/d eps = -xi_i); u, the jets and the fluxes flow with +eta,
    +zeta, +mu and +H.
    """
    rhs = {
        "x": -gs.xi1, "y": -gs.xi2, "t": -gs.xi3, "u": gs.eta,
        "v1": gs.zeta1, "v2": gs.zeta2, "v3": gs.zeta3,
        "f": gs.mu1, "g": gs.mu2, "h": gs.H,
    }
    return LieSystem(rhs={k: sp.sympify(v) for k, v in rhs.items()}, functions=dict(functions))


def integrate_lie(sys: LieSystem, point: Sequence[float], eps: float,
                  steps: int = 1000) -> tuple[float, ...]:
    """Classical fixed-step RK4 flow of the state from ``point`` to ``eps``."""
    if steps < 1:
        raise ValueError("steps must be positive")
    fns = [compile_fast(sys.rhs[name], sys.functions, args=_STATE) for name in _STATE_NAMES]
    state = np.asarray(point, dtype=float)
    if state.shape != (10,):
        raise ValueError("point must supply (x, y, t, u, v1, v2, v3, f, g, h)")

    def deriv(s):
        return np.array([fn(*s) for fn in fns])

    h = eps / steps
    for k in range(steps):
        try:
            k1 = deriv(state)
            k2 = deriv(state + 0.5 * h * k1)
            k3 = deriv(state + 0.5 * h * k2)
            k4 = deriv(state + h * k3)
        except (ZeroDivisionError, OverflowError, FloatingPointError, DomainError) as exc:
            raise LieFlowError(f"singularity hit: {exc}", k * h) from exc
        state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(state)):
            raise LieFlowError("flow left the finite domain", (k + 1) * h)
    return tuple(float(v) for v in state)


def closed_form_state(pt: PointTransformation, point: Sequence[float], eps: float,
                      functions: Mapping[str, NumericFunction]) -> tuple[float, ...]:
    """Evaluate the closed-form maps at a numeric state point."""
    args = tuple(_STATE) + (EPS,)
    vals = tuple(point) + (eps,)
    for den in pt.denominators:
        dfn = compile_fast(den, functions, args=args)
        if abs(dfn(*vals)) < 1e-12:
            raise DomainError("transformation evaluated on its singular locus", den)
    out = []
    for s in _STATE:
        fn = compile_fast(pt.all_maps()[s], functions, args=args)
        out.append(float(fn(*vals)))
    return tuple(out)


# ---------------------------------------------------------------------------
# invariance sampling

_W = sp.symbols("w11 w12 w13 w22 w23 w33")
_WSYM = {(0, 0): _W[0], (0, 1): _W[1], (0, 2): _W[2], (1, 1): _W[3], (1, 2): _W[4],
         (2, 2): _W[5]}


def _wsym(i: int, j: int) -> sp.Symbol:
    return _WSYM[(i, j) if i <= j else (j, i)]


def _d2(e: Expr, j: int) -> Expr:
    """Second-order total derivative along axis j on the 2-jet chart."""
    base = (X, Y, T)[j]
    out = sp.diff(e, base) + (V1, V2, V3)[j] * sp.diff(e, U)
    for i, v in enumerate((V1, V2, V3)):
        out += _wsym(i, j) * sp.diff(e, v)
    return out


def _residual_expr(m: FamilyMember) -> Expr:
    return _d2(m.f, 0) + _d2(m.g, 1) + m.h - _wsym(2, 2)


@dataclass(frozen=True)
class InvarianceReport:
    family: str
    samples: int
    max_deviation: float
    singular_rejections: int

    def as_dict(self) -> dict:
        return {"family": self.family, "samples": self.samples,
                "max_deviation": self.max_deviation,
                "singular_rejections": self.singular_rejections}


def verify_invariance(m: FamilyMember, pt: PointTransformation, samples: int,
                      functions: Mapping[str, NumericFunction],
                      seed: int = 0, eps_value: float | None = None,
                      rng=None) -> InvarianceReport:
    """Sample the equation-invariance identity on random 2-jet points.

    At each sample the full 2-jet is transformed (base maps, stored jet
    maps, second jets via the chain rule) and the residual of the
    transformed member at the transformed point is compared against the
    original residual divided by the Jacobian determinant of the base maps.
    Points too close to a singular locus (any |denominator| < 0.05) are
    redrawn and counted.
    """
    import random

    rng = rng or random.Random(seed)
    args = tuple(CHART) + tuple(_W) + (EPS,)

    mbar = transform_member(m, pt)
    res_old = compile_fast(_residual_expr(m), functions, args=args)
    res_new = compile_fast(_residual_expr(mbar), functions, args=args)
    dens = [compile_fast(d, functions, args=args) for d in pt.denominators]
    base_fns = [compile_fast(e, functions, args=args)
                for e in (pt.xbar, pt.ybar, pt.tbar, pt.ubar)]
    jet_fns = [compile_fast(e, functions, args=args)
               for e in (pt.v1bar, pt.v2bar, pt.v3bar)]
    M_fns = [[compile_fast(_dhat((pt.xbar, pt.ybar, pt.tbar)[i], j), functions, args=args)
              for j in range(3)] for i in range(3)]
    b_fns = [[compile_fast(_d2((pt.v1bar, pt.v2bar, pt.v3bar)[i], j), functions, args=args)
              for j in range(3)] for i in range(3)]

    max_dev = 0.0
    rejections = 0
    accepted = 0
    while accepted < samples:
        point = (
            [rng.uniform(-1, 1) for _ in range(3)]            # x, y, t
            + [rng.uniform(-1, 1)]                            # u
            + [rng.uniform(-0.5, 0.5) for _ in range(3)]      # jets
            + [rng.uniform(-0.5, 0.5) for _ in range(6)]      # second jets
            + [eps_value if eps_value is not None else rng.uniform(0.01, 0.3)]
        )
        if any(abs(d(*point)) < 0.05 for d in dens):
            rejections += 1
            continue
        Mmat = np.array([[fn(*point) for fn in row] for row in M_fns])
        det = float(np.linalg.det(Mmat))
        xb, yb, tb, ub = (fn(*point) for fn in base_fns)
        vb = [fn(*point) for fn in jet_fns]
        B = np.array([[fn(*point) for fn in row] for row in b_fns])
        # B[i, j] = sum_k wbar[i, k] * M[k, j]  (M[k, j] = D_j xbar_k)
        Wbar = np.linalg.solve(Mmat.T, B.T).T
        new_point = (
            [xb, yb, tb, ub] + vb
            + [Wbar[0, 0], (Wbar[0, 1] + Wbar[1, 0]) / 2, (Wbar[0, 2] + Wbar[2, 0]) / 2,
               Wbar[1, 1], (Wbar[1, 2] + Wbar[2, 1]) / 2, Wbar[2, 2]]
            + [point[-1]]
        )
        dev = float(abs(res_new(*new_point) - res_old(*point) / det))
        max_dev = max(max_dev, dev)
        accepted += 1
    return InvarianceReport(family=pt.family, samples=samples,
                            max_deviation=max_dev, singular_rejections=rejections)
