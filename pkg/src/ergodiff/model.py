"""Drift models, their invariant densities, and class-membership checks.

A drift b gives rise to the stationary density rho(x) proportional to
exp(int_0^x 2 b(y) dy) (unit diffusion coefficient throughout).  Densities
and distribution functions are tabulated on a uniform grid by composite
trapezoid quadrature with a Richardson refinement check; the default grid
radius is classA + 10/classGamma, where the exponential tail decay makes
the truncated mass negligible.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .bumps import odd_bump, odd_bump_prime
from .errors import (DomainError, GridTooCoarse, NonErgodicDrift,
                     TailNotResolved, ZeroDensity)

DEFAULT_SPACING = 1e-3
DENSITY_FLOOR = 1e-300


def strict_floor(x):
    """Greatest integer strictly smaller than x (so strict_floor(1) == 0)."""
    return int(math.ceil(x)) - 1


@dataclass(frozen=True)
class HolderSpec:
    """Smoothness class parameters (order beta, radius L)."""

    beta: float
    L: float

    def __post_init__(self):
        if self.beta <= 0 or self.L <= 0:
            raise DomainError("HolderSpec requires beta > 0 and L > 0")


@dataclass(frozen=True, eq=False)
class DriftModel:
    """A drift coefficient with its growth/mean-reversion class constants.

    ``class_c``, ``class_a`` and ``class_gamma`` are the linear-growth
    constant, the radius beyond which mean reversion is required, and the
    reversion margin.  ``holder`` optionally records the smoothness class
    of the invariant density (order beta+1, radius L).
    """

    family: str
    params: dict = field(repr=False)
    class_c: float = 1.0
    class_a: float = 1.0
    class_gamma: float = 1.0
    holder: Optional[HolderSpec] = None
    closed_form: Optional[str] = None

    def __post_init__(self):
        if self.class_c < 1.0:
            raise DomainError("class_c must be >= 1")
        if self.class_a <= 0 or self.class_gamma <= 0:
            raise DomainError("class_a and class_gamma must be positive")

    # -- constructors ----------------------------------------------------
    @classmethod
    def ornstein_uhlenbeck(cls, gamma=1.0, class_c=None, class_a=1.0,
                           class_gamma=None, holder=None):
        """b(x) = -gamma * x."""
        if gamma <= 0:
            raise DomainError("gamma must be positive")
        if class_c is None:
            class_c = max(1.0, gamma)
        if class_gamma is None:
            class_gamma = gamma * class_a
        return cls("ou", {"gamma": float(gamma)}, class_c, class_a,
                   class_gamma, holder, closed_form="gaussian")

    @classmethod
    def tanh_shift(cls, amplitude=1.0, slope=1.0, shift=0.0, class_c=None,
                   class_a=None, class_gamma=None, holder=None):
        """Bounded drift b(x) = -amplitude * tanh(slope * (x - shift))."""
        if amplitude <= 0 or slope <= 0:
            raise DomainError("amplitude and slope must be positive")
        if class_a is None:
            class_a = abs(shift) + 1.0
        if class_gamma is None:
            class_gamma = amplitude * math.tanh(slope * (class_a - abs(shift)))
        if class_c is None:
            class_c = max(1.0, amplitude)
        return cls("tanh", {"a": float(amplitude), "c": float(slope),
                            "shift": float(shift)},
                   class_c, class_a, class_gamma, holder)

    @classmethod
    def bump_perturbed(cls, base, amplitude, center, width, base_inv=None,
                       holder=None):
        """Drift whose invariant density is the base density plus an odd bump.

        The perturbation G(x) = amplitude * B((x - center)/width), with B the
        canonical odd bump, integrates to zero, so the perturbed density has
        mass one; the drift follows from b = rho'/(2 rho).  The bump support
        must lie strictly inside (-class_a, class_a) of the base model.
        """
        if width <= 0:
            raise DomainError("width must be positive")
        if abs(center) + width / 2 >= base.class_a:
            raise DomainError("bump support must stay inside (-A, A)")
        if base_inv is None:
            base_inv = build_invariant(base)
        lo = center - width / 2
        hi = center + width / 2
        probe = np.linspace(lo, hi, 512)
        g = amplitude * odd_bump((probe - center) / width)
        if np.any(base_inv.rho_at(probe) + g <= 0):
            raise DomainError("perturbed density not positive")
        return cls("bump", {"base": base, "base_inv": base_inv,
                            "amplitude": float(amplitude),
                            "center": float(center), "width": float(width)},
                   base.class_c, base.class_a, base.class_gamma,
                   holder if holder is not None else base.holder)

    @classmethod
    def tabulated(cls, grid, values, class_c=None, class_a=1.0,
                  class_gamma=1.0, holder=None):
        """Drift given by a table; linear interpolation inside the grid,
        linear extrapolation with the edge slopes outside."""
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
            raise DomainError("tabulated drift needs matching 1-d arrays")
        if np.any(np.diff(grid) <= 0):
            raise DomainError("tabulated drift grid must increase strictly")
        if class_c is None:
            class_c = max(1.0, float(np.max(np.abs(values) / (1 + np.abs(grid)))))
        return cls("tabulated", {"grid": grid, "values": values},
                   class_c, class_a, class_gamma, holder)

    # -- evaluation ------------------------------------------------------
    def drift(self, x):
        """Evaluate b(x); vectorised, defined for every real argument."""
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.family == "ou":
            out = -p["gamma"] * x
        elif self.family == "tanh":
            out = -p["a"] * np.tanh(p["c"] * (x - p["shift"]))
        elif self.family == "bump":
            base, inv = p["base"], p["base_inv"]
            rho0 = inv.rho_at(x)
            rho0p = 2.0 * base.drift(x) * rho0
            u = (x - p["center"]) / p["width"]
            g = p["amplitude"] * odd_bump(u)
            gp = (p["amplitude"] / p["width"]) * odd_bump_prime(u)
            out = (rho0p + gp) / (2.0 * (rho0 + g))
        else:
            g, v = p["grid"], p["values"]
            out = np.interp(x, g, v)
            slo = (v[1] - v[0]) / (g[1] - g[0])
            shi = (v[-1] - v[-2]) / (g[-1] - g[-2])
            out = np.where(x < g[0], v[0] + slo * (x - g[0]), out)
            out = np.where(x > g[-1], v[-1] + shi * (x - g[-1]), out)
        return out if out.ndim else float(out)

    def drift_table(self, lo, hi, spacing=DEFAULT_SPACING):
        """Uniform tabulation used by the compiled Euler loop."""
        n_lo = int(math.floor(lo / spacing))
        n_hi = int(math.ceil(hi / spacing))
        grid = np.arange(n_lo, n_hi + 1) * spacing
        return grid, self.drift(grid)


@dataclass(frozen=True, eq=False)
class InvariantModel:
    """Tabulated invariant density, CDF and diffusion transforms.

    ``scale`` holds s(x) = int_0^x exp(-int_0^y 2b) dy; its logarithm of
    absolute value is kept separately since s overflows in far tails.
    ``speed_total`` is m(R) under the normalisation rho = exp(int 2b)/m(R),
    i.e. it coincides with the normalising constant.
    """

    grid: np.ndarray = field(repr=False)
    rho: np.ndarray = field(repr=False)
    cdf: np.ndarray = field(repr=False)
    norm_const: float = 1.0
    log_integrand: np.ndarray = field(default=None, repr=False)
    speed_total: float = 1.0
    scale: np.ndarray = field(default=None, repr=False)
    log_abs_scale: np.ndarray = field(default=None, repr=False)
    spacing: float = DEFAULT_SPACING
    radius: float = 0.0
    model: Optional[DriftModel] = None
    _qp: np.ndarray = field(default=None, repr=False)
    _qx: np.ndarray = field(default=None, repr=False)

    def rho_at(self, x):
        return np.interp(x, self.grid, self.rho)

    def cdf_at(self, x):
        return np.interp(x, self.grid, self.cdf)

    def rho_prime_at(self, x):
        """rho'(x), via the identity rho' = 2 b rho when the drift is known."""
        if self.model is not None:
            return 2.0 * self.model.drift(x) * self.rho_at(x)
        return np.interp(x, self.grid, np.gradient(self.rho, self.spacing))

    def quantile(self, u):
        """Inverse CDF by interpolation on the strictly increasing part."""
        return np.interp(u, self._qp, self._qx)

    def mass(self):
        return float(np.trapezoid(self.rho, dx=self.spacing))

    def sup_rho(self):
        return float(np.max(self.rho))

    def export_csv(self, path):
        data = np.column_stack([self.grid, self.rho, self.cdf, self.scale])
        np.savetxt(path, data, delimiter=",", header="x,rho,cdf,scale",
                   comments="", fmt="%.17g")

    @classmethod
    def from_density(cls, grid, rho, model=None, mass_tol=1e-3):
        """Build the full record from a tabulated positive density."""
        grid = np.asarray(grid, dtype=float)
        rho = np.asarray(rho, dtype=float)
        spacing = float(grid[1] - grid[0])
        if np.any(rho <= 0):
            raise ZeroDensity("from_density requires a strictly positive table")
        mass = np.trapezoid(rho, dx=spacing)
        if abs(mass - 1.0) > mass_tol:
            raise DomainError(f"density mass {mass:.6f} too far from 1")
        center = int(np.argmin(np.abs(grid)))
        log_rho = np.log(rho)
        log_integrand = log_rho - log_rho[center]
        norm_const = float(1.0 / rho[center])
        return _assemble(grid, rho, log_integrand, norm_const, spacing,
                         float(grid[-1]), model)


def _log_cumtrapz_exp(log_f, spacing):
    """log of the cumulative trapezoid integral of exp(log_f), stably."""
    panels = np.logaddexp(log_f[:-1], log_f[1:]) + np.log(spacing / 2.0)
    out = np.empty(log_f.shape[0])
    out[0] = -np.inf
    out[1:] = np.logaddexp.accumulate(panels)
    return out


def _assemble(grid, rho, log_integrand, norm_const, spacing, radius, model):
    ci = cumulative_trapezoid(rho, dx=spacing, initial=0.0)
    total = ci[-1]
    cdf = ci / total

    center = int(np.argmin(np.abs(grid)))
    log_abs_scale = np.full(grid.shape[0], -np.inf)
    log_abs_scale[center:] = _log_cumtrapz_exp(-log_integrand[center:], spacing)
    log_abs_scale[:center + 1] = _log_cumtrapz_exp(
        -log_integrand[center::-1], spacing)[::-1]
    with np.errstate(over="ignore"):
        scale = np.sign(grid) * np.exp(log_abs_scale)

    keep = np.concatenate([[True], np.diff(cdf) > 0])
    return InvariantModel(grid=grid, rho=rho, cdf=cdf, norm_const=norm_const,
                          log_integrand=log_integrand, speed_total=norm_const,
                          scale=scale, log_abs_scale=log_abs_scale,
                          spacing=spacing, radius=radius, model=model,
                          _qp=cdf[keep], _qx=grid[keep])


def default_radius(model):
    """classA + 15/classGamma.

    Exponential tails decay at rate at least 2*classGamma beyond classA,
    so the truncated integrand is ~e^-30 of the peak, comfortably below
    the 1e-12 decay threshold even for drifts at the class margin.
    """
    return model.class_a + 15.0 / model.class_gamma


def build_invariant(model, grid_spec=None, richardson_tol=1e-6):
    """Tabulate the invariant density of a drift model by quadrature.

    Parameters
    ----------
    model : DriftModel
    grid_spec : (radius, spacing), optional
        Defaults to (classA + 10/classGamma, 1e-3).  The radius is rounded
        to a whole number of spacings so the grid contains 0 exactly.
    richardson_tol : float
        Relative change of the normalising constant allowed when the grid
        is coarsened by a factor two (trapezoid error check).

    Raises
    ------
    NonErgodicDrift
        If the unnormalised integrand fails to decay at either grid end
        (tail value above 1e-12 of the peak).
    GridTooCoarse
        If Richardson refinement moves the normalising constant by more
        than ``richardson_tol``.
    """
    if grid_spec is None:
        radius, spacing = default_radius(model), DEFAULT_SPACING
    else:
        radius, spacing = grid_spec
    if radius <= model.class_a:
        raise DomainError("grid radius must exceed class_a")
    half = int(round(radius / spacing))
    grid = np.arange(-half, half + 1) * spacing
    radius = half * spacing

    two_b = 2.0 * model.drift(grid)
    ci = cumulative_trapezoid(two_b, dx=spacing, initial=0.0)
    log_integrand = ci - ci[half]

    m = float(np.max(log_integrand))
    w = np.exp(log_integrand - m)
    if w[0] > 1e-12 or w[-1] > 1e-12:
        raise NonErgodicDrift(
            "unnormalised density does not decay at the grid ends "
            f"(tail/peak = {max(w[0], w[-1]):.3e})")
    z = float(np.trapezoid(w, dx=spacing))
    z_coarse = float(np.trapezoid(w[::2], dx=2 * spacing))
    if abs(z_coarse - z) > richardson_tol * z:
        raise GridTooCoarse(
            f"normalising constant moves by {abs(z_coarse - z) / z:.3e} "
            "under refinement")
    norm_const = z * math.exp(m)
    rho = w / z
    return _assemble(grid, rho, log_integrand, norm_const, spacing, radius,
                     model)


def drift_from_density(inv, window=None):
    """Recover the drift b = rho'/(2 rho) from a tabulated density.

    Central differences on the tabulation grid; raises ZeroDensity if the
    density falls below 1e-300 inside the evaluation window.
    """
    lo, hi = window if window is not None else (inv.grid[0], inv.grid[-1])
    sel = (inv.grid >= lo) & (inv.grid <= hi)
    rho = inv.rho[sel]
    if np.min(rho) < DENSITY_FLOOR:
        raise ZeroDensity("density below representable floor in the window")
    grid = inv.grid[sel]
    rho_prime = np.gradient(rho, inv.spacing)
    values = rho_prime / (2.0 * rho)
    src = inv.model
    return DriftModel.tabulated(
        grid, values,
        class_c=src.class_c if src else None,
        class_a=src.class_a if src else 1.0,
        class_gamma=src.class_gamma if src else 1.0,
        holder=src.holder if src else None)


@dataclass(frozen=True)
class MembershipReport:
    passed: bool
    n_probes: int
    violations: tuple


def check_sigma_membership(model, probe_grid=None):
    """Probe the linear-growth and mean-reversion conditions.

    Diagnostic only: returns a report listing every probe point where
    |b(x)| > classC (1+|x|) or, for |x| > classA, sgn(x) b(x) > -classGamma.
    """
    if probe_grid is None:
        r3 = 3.0 * default_radius(model)
        probe_grid = np.arange(-int(round(r3 / 0.01)),
                               int(round(r3 / 0.01)) + 1) * 0.01
    b = model.drift(probe_grid)
    tol = 1e-9
    growth_bad = np.abs(b) > model.class_c * (1.0 + np.abs(probe_grid)) + tol
    outside = np.abs(probe_grid) > model.class_a
    revert_bad = outside & (np.sign(probe_grid) * b > -model.class_gamma + tol)
    viol = []
    for idx in np.nonzero(growth_bad)[0][:100]:
        viol.append((float(probe_grid[idx]), "linear_growth", float(b[idx])))
    for idx in np.nonzero(revert_bad)[0][:100]:
        viol.append((float(probe_grid[idx]), "mean_reversion", float(b[idx])))
    return MembershipReport(passed=not viol, n_probes=probe_grid.size,
                            violations=tuple(viol))


@dataclass(frozen=True)
class HolderReport:
    passed: bool
    sup_norms: tuple
    seminorm: float
    k: int
    exponent: float
    slack: float


def check_holder(values, spec, grid, slack=1.05):
    """Estimate Hoelder-class membership of a tabulated function.

    The floor convention is strict (strict_floor(beta) = greatest integer
    strictly below beta), so beta = 2 checks one derivative plus a
    Lipschitz seminorm of it.  Derivatives use k-fold central differences
    (np.gradient) with k points trimmed at each boundary; the seminorm is
    scanned over lags 1..8 plus all powers of two (documented stencil).
    ``passed`` allows the stated multiplicative slack for discretisation.
    """
    values = np.asarray(values, dtype=float)
    grid = np.asarray(grid, dtype=float)
    spacing = grid[1] - grid[0]
    if not np.allclose(np.diff(grid), spacing, rtol=1e-9, atol=0):
        raise GridTooCoarse("check_holder requires a uniform grid")
    k = strict_floor(spec.beta)
    exponent = spec.beta - k
    if values.size < 2 * k + 9:
        raise GridTooCoarse("grid too short for the requested derivatives")

    sup_norms = []
    d = values
    for j in range(k + 1):
        trim = j
        core = d[trim:values.size - trim] if trim else d
        sup_norms.append(float(np.max(np.abs(core))))
        if j < k:
            d = np.gradient(d, spacing)
    top = d[k:values.size - k] if k else d

    lags = sorted(set(list(range(1, 9))
                      + [2 ** p for p in range(int(np.log2(top.size - 1)) + 1)]))
    seminorm = 0.0
    for m in lags:
        if m >= top.size:
            break
        gap = np.max(np.abs(top[m:] - top[:-m]))
        seminorm = max(seminorm, float(gap / (m * spacing) ** exponent))

    passed = max(sup_norms) <= spec.L * slack and seminorm <= spec.L * slack
    return HolderReport(passed, tuple(sup_norms), seminorm, k, exponent, slack)


@dataclass(frozen=True)
class DonskerReport:
    cond_a: float
    tail_x: tuple
    tail_values: tuple
    passed: bool


def donsker_diagnostics(inv, tail_tol=1e-6, n_tail=12):
    """Numerical check of the uniform-CLT conditions.

    cond_a is the quadrature of F^2 (1-F)^2 / (rho * m(R)); the tail
    sequence is rho^2 |s| loglog|s| sampled toward the left grid end,
    required to decrease below ``tail_tol``.

    Raises
    ------
    TailNotResolved
        If the cond_a integrand at either grid end exceeds 1e-8 of its peak.
    """
    f = inv.cdf
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where((f > 0) & (f < 1), f**2 * (1 - f) ** 2 / inv.rho, 0.0)
    w = np.nan_to_num(w, nan=0.0, posinf=np.inf)
    peak = float(np.max(w))
    # the tabulated F is exactly 0/1 at the very ends, so probe the
    # outermost 1% bands rather than the endpoint nodes themselves
    band = max(2, w.size // 100)
    edge = float(max(np.max(w[:band]), np.max(w[-band:])))
    if edge > 1e-8 * peak:
        raise TailNotResolved(
            f"cond_a integrand near the grid ends is {edge:.3e} "
            f"(peak {peak:.3e})")
    cond_a = float(np.trapezoid(w, dx=inv.spacing) / inv.speed_total)

    # left-tail sequence where loglog|s| is defined
    a_edge = inv.model.class_a if inv.model is not None else 0.0
    usable = np.nonzero(inv.log_abs_scale > 1.0)[0]
    usable = usable[inv.grid[usable] < -(a_edge + 1.0)]
    if usable.size < 2:
        raise TailNotResolved("no usable left-tail region for cond_b")
    idx = np.unique(np.linspace(usable[0], usable[-1], n_tail).astype(int))
    idx = idx[::-1]  # ordered toward -R
    log_s = inv.log_abs_scale[idx]
    vals = np.exp(2.0 * np.log(inv.rho[idx]) + log_s + np.log(np.log(log_s)))
    decreasing = bool(np.all(np.diff(vals) <= vals[:-1] * 0.05 + 1e-300))
    passed = decreasing and vals[-1] < tail_tol
    return DonskerReport(cond_a, tuple(inv.grid[idx]), tuple(vals), passed)
