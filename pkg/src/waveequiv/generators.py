"""Prolonged vector fields for the wave family written as a balance equation.

The family u_tt = f_x + g_y + h is recast as d(sigma_i)/dx_i + sigma = 0 with
sigma_1 = f, sigma_2 = g, sigma_3 = -v3, sigma = h.  A generator set collects
the coefficients of the prolonged field on the extended manifold:

* xi1, xi2, xi3, eta       on the local coordinates (x, y, t, u),
* zeta_1..zeta_3           on the jet coordinates v1, v2, v3,
* mu1, mu2 (and mu3)       on the flux slots f, g (and sigma_3),
* H                        on the source slot h.

The coefficient formulas follow the classical construction for balance
equations:

    zeta_i = D_i eta + sum_j (D_i xi_j) v_j
    mu_i   = (w + xi_j_u v_j) sigma_i - (D_j xi_i) sigma_j
             + alpha_ij v_j + beta_i
    H      = (w + xi_j_u v_j) h - sum_i Dhat_i mu_i

with D_i = d/dx_i + v_i d/du, Dhat_i its restriction acting only through the
explicit (x_i, u) dependence, alpha_ji = -alpha_ij off the diagonal, and
w, alpha_ij, beta_i free smooth functions of (x, y, t, u).

Sign convention: the stored coefficients are the ones conventionally printed
for this family; the finite flow of the local coordinates runs with the
opposite sign (d xbar_i / d eps = -xi_i) while u, the jets and the slots flow
with +eta, +zeta, +mu, +H.  See `transforms.lie_system`.

Imposing the wave structure sigma_3 = -v3 forces the single determining
equation zeta_3 + mu_3 = 0, whose solution pins

    xi3 = xi3(t), alpha_13 = d(xi1)/dt, alpha_23 = d(xi2)/dt,
    beta_3 = -d(eta)/dt, w = alpha_33 + 2 d(xi3)/dt + d(eta)/du.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import sympy as sp

from .expr import (
    AXES, JET_COORDS, T, U, V1, V2, V3, X, Y,
    Expr, ExprError, formal_function, is_zero, normalize, to_text, total_derivative,
)

# Flux/source value slots on the extended manifold.
SLOT_F = sp.Symbol("f")
SLOT_G = sp.Symbol("g")
SLOT_H = sp.Symbol("h")
SLOTS = (SLOT_F, SLOT_G, SLOT_H)

#: balance fluxes sigma_1, sigma_2, sigma_3 of the wave family
SIGMA = (SLOT_F, SLOT_G, -V3)

_BASE_SET = {X, Y, T, U}
_AXIS_ORDER = ("x", "y", "t")

# Extended coordinates: the first derivatives of f, g, h, named by meaning
# (f_v3 is df/du_t and so on).  They index both the vanishing sets of the
# case analysis and the attached vector-field components.
EXT_NAMES = tuple(
    f"{fn}_{arg}" for fn in ("f", "g", "h") for arg in ("x", "y", "t", "u", "v1", "v2", "v3")
)
EXT = {name: sp.Symbol(name) for name in EXT_NAMES}


class ArgumentDependenceError(ExprError):
    """A free function depends on arguments it is not allowed to."""


class ConstraintError(ExprError):
    """Free data is inconsistent with the wave determining equation."""

    def __init__(self, failures):
        self.failures = list(failures)
        lines = ", ".join(f"{slot}: residual {to_text(res)}" for slot, res in self.failures)
        super().__init__(f"determining-equation constraints failed ({lines})")


def _check_args(label: str, e: Expr, allowed: set) -> Expr:
    e = sp.sympify(e)
    stray = e.free_symbols - allowed
    if stray:
        names = sorted(map(str, stray))
        raise ArgumentDependenceError(f"{label} may depend only on "
                                      f"{sorted(map(str, allowed))}; found {names}")
    return e


@dataclass(frozen=True)
class FreeData:
    """Free functions parametrizing a generator set.

    phi1..phi3 and eta are the coefficients attached to (x, y, t, u); w,
    alpha_ij and beta_i enter the flux components.  Slots left as ``None``
    (w, alpha13, alpha23, beta3) are fixed by the determining equation;
    explicit values for them are checked for consistency when solving.
    lam and gam are optional named shape functions of (x, y) and (x, y, t)
    used by restricted case instances; they carry no independent role here.
    """

    phi1: Expr = sp.Integer(0)
    phi2: Expr = sp.Integer(0)
    phi3: Expr = sp.Integer(0)
    eta: Expr = sp.Integer(0)
    w: Expr | None = None
    alpha11: Expr = sp.Integer(0)
    alpha12: Expr = sp.Integer(0)
    alpha13: Expr | None = None
    alpha22: Expr = sp.Integer(0)
    alpha23: Expr | None = None
    alpha33: Expr = sp.Integer(0)
    beta1: Expr = sp.Integer(0)
    beta2: Expr = sp.Integer(0)
    beta3: Expr | None = None
    lam: Expr | None = None
    gam: Expr | None = None

    def validated(self) -> "FreeData":
        for label in ("phi1", "phi2", "phi3", "eta", "w", "alpha11", "alpha12",
                      "alpha13", "alpha22", "alpha23", "alpha33",
                      "beta1", "beta2", "beta3"):
            val = getattr(self, label)
            if val is not None:
                _check_args(label, val, _BASE_SET)
        if self.lam is not None:
            _check_args("lam", self.lam, {X, Y})
        if self.gam is not None:
            _check_args("gam", self.gam, {X, Y, T})
        return self


def generic_free_data() -> FreeData:
    """Fully generic free data: every slot an opaque function of (x, y, t, u)."""
    def atom(name):
        return formal_function(name, 4)(X, Y, T, U)

    return FreeData(
        phi1=atom("xi1"), phi2=atom("xi2"), phi3=atom("xi3"), eta=atom("eta"),
        alpha11=atom("alpha11"), alpha12=atom("alpha12"), alpha22=atom("alpha22"),
        alpha33=atom("alpha33"), beta1=atom("beta1"), beta2=atom("beta2"),
    )


@dataclass(frozen=True)
class GeneratorSet:
    """Coefficients of the prolonged field, plus the resolved free data."""

    xi1: Expr
    xi2: Expr
    xi3: Expr
    eta: Expr
    zeta1: Expr
    zeta2: Expr
    zeta3: Expr
    mu1: Expr
    mu2: Expr
    mu3: Expr
    H: Expr
    free: FreeData
    determined: bool = False

    @property
    def xi(self) -> tuple[Expr, Expr, Expr]:
        return (self.xi1, self.xi2, self.xi3)

    @property
    def zeta(self) -> tuple[Expr, Expr, Expr]:
        return (self.zeta1, self.zeta2, self.zeta3)

    @property
    def mu(self) -> tuple[Expr, Expr, Expr]:
        return (self.mu1, self.mu2, self.mu3)

    def coefficients(self) -> dict[str, Expr]:
        return {
            "xi1": self.xi1, "xi2": self.xi2, "xi3": self.xi3, "eta": self.eta,
            "zeta1": self.zeta1, "zeta2": self.zeta2, "zeta3": self.zeta3,
            "mu1": self.mu1, "mu2": self.mu2, "mu3": self.mu3, "H": self.H,
        }

    def as_dict(self) -> dict:
        return {name: to_text(sp.expand(e)) for name, e in self.coefficients().items()}

    def report(self) -> str:
        lines = [f"{name} = {text}" for name, text in self.as_dict().items()]
        return "\n".join(lines)


def _alpha_matrix(fd: FreeData) -> list[list[Expr]]:
    a12, a13, a23 = fd.alpha12, fd.alpha13, fd.alpha23
    return [
        [fd.alpha11, a12, a13],
        [-a12, fd.alpha22, a23],
        [-a13, -a23, fd.alpha33],
    ]


def _materialize(fd: FreeData) -> FreeData:
    """Fill unset determined slots with opaque functions of (x, y, t, u)."""
    def atom(name):
        return formal_function(name, 4)(X, Y, T, U)

    updates = {}
    for slot in ("w", "alpha13", "alpha23", "beta3"):
        if getattr(fd, slot) is None:
            updates[slot] = atom(slot)
    return replace(fd, **updates) if updates else fd


def _assemble(fd: FreeData, determined: bool) -> GeneratorSet:
    xi = (sp.sympify(fd.phi1), sp.sympify(fd.phi2), sp.sympify(fd.phi3))
    eta = sp.sympify(fd.eta)
    w = sp.sympify(fd.w)
    alpha = _alpha_matrix(fd)
    beta = (fd.beta1, fd.beta2, fd.beta3)

    zetas = []
    for axis in _AXIS_ORDER:
        z = total_derivative(eta, axis)
        for j in range(3):
            z += total_derivative(xi[j], axis) * JET_COORDS[j]
        zetas.append(sp.expand(z))

    scale = w + sum(sp.diff(xi[j], U) * JET_COORDS[j] for j in range(3))
    mus = []
    for i in range(3):
        m = scale * SIGMA[i]
        for j, axis in enumerate(_AXIS_ORDER):
            m -= total_derivative(xi[i], axis) * SIGMA[j]
        m += sum(alpha[i][j] * JET_COORDS[j] for j in range(3)) + beta[i]
        mus.append(sp.expand(m))

    H = _source_component(scale, mus)
    return GeneratorSet(
        xi1=xi[0], xi2=xi[1], xi3=xi[2], eta=eta,
        zeta1=zetas[0], zeta2=zetas[1], zeta3=zetas[2],
        mu1=mus[0], mu2=mus[1], mu3=mus[2], H=H,
        free=fd, determined=determined,
    )


def _restricted_total(e: Expr, axis: str) -> Expr:
    """d/dx_i + v_i d/du acting only through explicit base dependence."""
    base, jet = AXES[axis]
    return sp.diff(e, base) + jet * sp.diff(e, U)


def _source_component(scale: Expr, mus) -> Expr:
    H = scale * SLOT_H
    for axis, m in zip(_AXIS_ORDER, mus):
        H -= _restricted_total(m, axis)
    return sp.expand(H)


def build_general(fd: FreeData) -> GeneratorSet:
    """Generator set before the wave determining equation is imposed.

    Unset determined slots (w, alpha13, alpha23, beta3) are materialized as
    opaque functions, so the residual zeta3 + mu3 is visibly nonzero until
    :func:`solve_wave_determining` fixes them.
    """
    fd = _materialize(fd.validated())
    return _assemble(fd, determined=False)


def determining_residual(gs: GeneratorSet) -> Expr:
    """Residual of the wave determining equation zeta3 + mu3 = 0."""
    return sp.expand(gs.zeta3 + gs.mu3)


def solve_wave_determining(gs: GeneratorSet) -> GeneratorSet:
    """Impose the determining equation and return the admissible generator set.

    xi3 is restricted to depend on t only (a free-function atom is replaced
    by a t-only atom; a concrete expression with x, y or u dependence is
    inconsistent), alpha13, alpha23, beta3 and w are fixed, and zeta3 + mu3
    is verified to vanish identically afterwards.  Explicit values supplied
    for determined slots are checked rather than overwritten, and any
    mismatch is reported per slot.
    """
    original = gs.free
    phi3 = sp.sympify(original.phi3)
    failures = []
    if phi3.free_symbols & {X, Y, U}:
        base = getattr(type(phi3), "_base", None)
        if base is not None and tuple(phi3.args) == (X, Y, T, U) \
                and type(phi3)._dorders == (0, 0, 0, 0):
            phi3 = formal_function(base, 1)(T)
        else:
            for s in (X, Y, U):
                d = sp.diff(phi3, s)
                if not is_zero(d):
                    failures.append((f"xi3 must depend on t only (d/d{s} nonzero)", d))
    if failures:
        raise ConstraintError(failures)
    original = replace(original, phi3=phi3)

    solved = {
        "alpha13": sp.diff(original.phi1, T),
        "alpha23": sp.diff(original.phi2, T),
        "beta3": -sp.diff(original.eta, T),
        "w": original.alpha33 + 2 * sp.diff(phi3, T) + sp.diff(original.eta, U),
    }
    updates = {}
    for slot, value in solved.items():
        given = getattr(original, slot)
        if given is not None and not (is_formal_placeholder(given, slot)):
            diff = sp.expand(given - value)
            if not is_zero(diff):
                failures.append((slot, diff))
            updates[slot] = sp.sympify(given)
        else:
            updates[slot] = sp.expand(value)
    if failures:
        raise ConstraintError(failures)

    fd2 = replace(original, **updates)
    out = _assemble(fd2, determined=True)
    res = determining_residual(out)
    if not is_zero(res):
        raise ConstraintError([("zeta3 + mu3", res)])
    return out


def is_formal_placeholder(e: Expr, slot: str) -> bool:
    """True when ``e`` is the opaque atom materialize() created for ``slot``."""
    return (getattr(type(e), "_base", None) == slot
            and getattr(type(e), "_dorders", None) == (0, 0, 0, 0)
            and tuple(e.args) == (X, Y, T, U))


def compute_H(gs: GeneratorSet) -> Expr:
    """Source-slot component with h left symbolic."""
    fd = gs.free
    scale = fd.w + sum(sp.diff(xi, U) * v for xi, v in zip(gs.xi, JET_COORDS))
    return _source_component(scale, gs.mu)


# ---------------------------------------------------------------------------
# components attached to the extended (derivative) coordinates

@dataclass(frozen=True)
class AdditionalComponents:
    """Vector-field components for the derivative coordinates of f, g, h.

    ``components`` maps each extended coordinate name (f_x, f_u, f_v3,
    g_v1, h_v3, ...) to the component attached to it; F1, F2 and G are the
    intermediate combinations the components are built from.
    """

    components: Mapping[str, Expr]
    F1: Expr
    F2: Expr
    G: Expr

    def for_coordinate(self, name: str) -> Expr:
        try:
            return self.components[name]
        except KeyError:
            raise ExprError(f"unknown extended coordinate {name!r}") from None


def additional_components(gs: GeneratorSet) -> AdditionalComponents:
    """All 21 components, linear in the extended coordinates they reference."""
    def combo(prefix: str, top: Expr) -> Expr:
        e = top
        for arg, coeff in zip(("x", "y", "t"), gs.xi):
            e -= EXT[f"{prefix}_{arg}"] * coeff
        e -= EXT[f"{prefix}_u"] * gs.eta
        for j, z in enumerate(gs.zeta, start=1):
            e -= EXT[f"{prefix}_v{j}"] * z
        return sp.expand(e)

    F1 = combo("f", gs.mu1)
    F2 = combo("g", gs.mu2)
    G = combo("h", gs.H)

    chart_dirs = {"x": X, "y": Y, "t": T, "u": U, "v1": V1, "v2": V2, "v3": V3}
    comps: dict[str, Expr] = {}
    for prefix, top in (("f", F1), ("g", F2), ("h", G)):
        for arg, direction in chart_dirs.items():
            c = sp.diff(top, direction)
            for slot_prefix, slot in (("f", SLOT_F), ("g", SLOT_G), ("h", SLOT_H)):
                c += sp.diff(top, slot) * EXT[f"{slot_prefix}_{arg}"]
            comps[f"{prefix}_{arg}"] = sp.expand(c)
    return AdditionalComponents(components=comps, F1=F1, F2=F2, G=G)
