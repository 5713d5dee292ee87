"""Members of the wave family u_tt = f_x + g_y + h and pointwise residuals."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol

import sympy as sp

from .expr import (
    AXES, CHART, EPS, JET_COORDS, U, V1, V2, V3, X, Y, T,
    Expr, ExprError, NumericFunction, compile_fast, depends_on, is_zero,
    normalize, parse, to_text, Context,
)

_VAR_NAMES = ("x", "y", "t", "u", "v1", "v2", "v3")
_VARS = dict(zip(_VAR_NAMES, CHART))
_NONLINEAR_VARS = (U, V1, V2, V3)


def _check_member_expr(label: str, e: Expr) -> Expr:
    e = sp.sympify(e)
    stray = e.free_symbols - set(CHART) - {EPS}
    if stray:
        raise ExprError(
            f"{label} may depend only on (x, y, t, u, u_x, u_y, u_t) and eps; "
            f"found {sorted(map(str, stray))}"
        )
    return e


@dataclass(frozen=True)
class FamilyMember:
    """A member (f, g, h) of the family, each over the first-jet chart.

    Constant f or g are accepted for test fixtures but flagged in
    ``warnings`` since the analysis assumes nonconstant fluxes.
    """

    f: Expr
    g: Expr
    h: Expr
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "f", _check_member_expr("f", self.f))
        object.__setattr__(self, "g", _check_member_expr("g", self.g))
        object.__setattr__(self, "h", _check_member_expr("h", self.h))
        warns = []
        for label, e in (("f", self.f), ("g", self.g)):
            if not any(depends_on(e, s) for s in CHART):
                warns.append(f"{label} is constant; the family analysis assumes nonconstant fluxes")
        object.__setattr__(self, "warnings", tuple(warns))

    def as_dict(self) -> dict:
        return {"f": to_text(self.f), "g": to_text(self.g), "h": to_text(self.h),
                "warnings": list(self.warnings)}


@dataclass(frozen=True)
class DependencySignature:
    """Structural dependency sets of f, g, h over the jet chart."""

    f_deps: frozenset[str]
    g_deps: frozenset[str]
    h_deps: frozenset[str]
    f_is_zero: bool
    g_is_zero: bool
    h_is_zero: bool

    def as_dict(self) -> dict:
        return {
            "f": sorted(self.f_deps), "g": sorted(self.g_deps), "h": sorted(self.h_deps),
            "f_is_zero": self.f_is_zero, "g_is_zero": self.g_is_zero, "h_is_zero": self.h_is_zero,
        }


@dataclass(frozen=True)
class BalanceForm:
    """The divergence form of the family: d(sigma_i)/dx_i + sigma = 0."""

    sigma1: Expr
    sigma2: Expr
    sigma3: Expr
    sigma: Expr


def balance_form(m: FamilyMember) -> BalanceForm:
    return BalanceForm(sigma1=m.f, sigma2=m.g, sigma3=-V3, sigma=m.h)


def signature(m: FamilyMember) -> DependencySignature:
    """Dependency sets decided after normalization, so cancelling occurrences
    (such as v3 - v3) do not count."""

    def deps(e: Expr) -> frozenset[str]:
        return frozenset(name for name, s in _VARS.items() if depends_on(e, s))

    return DependencySignature(
        f_deps=deps(m.f), g_deps=deps(m.g), h_deps=deps(m.h),
        f_is_zero=is_zero(m.f), g_is_zero=is_zero(m.g), h_is_zero=is_zero(m.h),
    )


def is_linear(m: FamilyMember) -> bool:
    """True iff f, g, h are jointly affine in (u, u_x, u_y, u_t)."""
    for e in (m.f, m.g, m.h):
        for i, a in enumerate(_NONLINEAR_VARS):
            for b in _NONLINEAR_VARS[i:]:
                if not is_zero(sp.diff(e, a, b)):
                    return False
    return True


class ScalarField(Protocol):
    """Pointwise sampler for a scalar field u(x, y, t)."""

    def value(self, x: float, y: float, t: float) -> float: ...

    #: exact first derivatives (v1, v2, v3) when available, else None
    def gradient(self, x: float, y: float, t: float) -> tuple[float, float, float] | None: ...


class CallableField:
    """Wrap a plain callable (and optional exact gradient) as a ScalarField."""

    def __init__(self, fn: Callable[[float, float, float], float],
                 grad: Callable[[float, float, float], tuple[float, float, float]] | None = None):
        self._fn = fn
        self._grad = grad

    def value(self, x, y, t):
        return self._fn(x, y, t)

    def gradient(self, x, y, t):
        return self._grad(x, y, t) if self._grad is not None else None


def _jets(field: ScalarField, x: float, y: float, t: float, h: float):
    g = field.gradient(x, y, t)
    if g is not None:
        return g
    v1 = (field.value(x + h, y, t) - field.value(x - h, y, t)) / (2 * h)
    v2 = (field.value(x, y + h, t) - field.value(x, y - h, t)) / (2 * h)
    v3 = (field.value(x, y, t + h) - field.value(x, y, t - h)) / (2 * h)
    return v1, v2, v3


_FLUX_CACHE: dict = {}


def _compiled_flux(e: Expr, fns: Mapping[str, NumericFunction]):
    """Compile-or-fetch a flux evaluator; None when the flux is zero."""
    key = (e, tuple(sorted((name, id(fn)) for name, fn in fns.items())))
    if key not in _FLUX_CACHE:
        _FLUX_CACHE[key] = None if is_zero(e) else compile_fast(e, fns)
    return _FLUX_CACHE[key]


def residual(m: FamilyMember, u_field: ScalarField, point: tuple[float, float, float],
             h_step: float, functions: Mapping[str, NumericFunction] | None = None) -> float:
    """Pointwise PDE residual f_x + g_y + h - u_tt by central differences.

    Derivatives run through the full composition: the flux arguments
    (u, u_x, u_y, u_t) at each stencil point come from the sampler (exact
    gradient if it has one, otherwise nested central differences), so the
    value is second-order accurate in ``h_step``.
    """
    if h_step <= 0:
        raise ValueError("h_step must be positive")
    if sp.sympify(m.f).has(EPS) or sp.sympify(m.g).has(EPS) or sp.sympify(m.h).has(EPS):
        raise ExprError("bind eps to a number before computing residuals")
    h = h_step
    x, y, t = point
    fns = functions or {}
    compiled = {label: _compiled_flux(e, fns)
                for label, e in (("f", m.f), ("g", m.g), ("h", m.h))}

    def flux(label: str, px: float, py: float, pt: float) -> float:
        fn = compiled[label]
        if fn is None:
            return 0.0
        uval = u_field.value(px, py, pt)
        j1, j2, j3 = _jets(u_field, px, py, pt, h)
        return fn(px, py, pt, uval, j1, j2, j3)

    total = 0.0
    if compiled["f"] is not None:
        total += (flux("f", x + h, y, t) - flux("f", x - h, y, t)) / (2 * h)
    if compiled["g"] is not None:
        total += (flux("g", x, y + h, t) - flux("g", x, y - h, t)) / (2 * h)
    if compiled["h"] is not None:
        total += flux("h", x, y, t)
    u_tt = (u_field.value(x, y, t + h) - 2 * u_field.value(x, y, t)
            + u_field.value(x, y, t - h)) / (h * h)
    return total - u_tt


# --- serialization ---------------------------------------------------------

def member_to_text(m: FamilyMember) -> str:
    return f"f = {to_text(m.f)}\ng = {to_text(m.g)}\nh = {to_text(m.h)}\n"


def member_from_text(text: str, ctx: Context | None = None) -> FamilyMember:
    """Parse the three-line record ``f = ...`` / ``g = ...`` / ``h = ...``.

    A missing field means 0.
    """
    ctx = ctx or Context()
    fields = {"f": sp.Integer(0), "g": sp.Integer(0), "h": sp.Integer(0)}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, body = line.partition("=")
        key = key.strip()
        if not sep or key not in fields:
            raise ExprError(f"line {lineno}: expected 'f = ...', 'g = ...' or 'h = ...'")
        fields[key] = parse(body.strip(), ctx)
    return FamilyMember(fields["f"], fields["g"], fields["h"])
