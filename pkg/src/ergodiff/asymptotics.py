"""Limit covariances, efficiency bounds, concentration-bound functions and
the minimax lower-bound hypothesis family.

Indicator functions 1{z >= x} are evaluated with value 1/2 when z equals
a grid node bitwise.  With that convention the trapezoid sum across the
jump equals the exact broken-trapezoid integral, so quadratures of
integrands containing indicators stay second-order accurate.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.stats import kstest

from .bumps import odd_bump, odd_bump_prime
from .errors import (DomainError, GridTooCoarse, HypothesisInvalid,
                     TailNotResolved, TooFewSamples)
from .model import (DriftModel, HolderSpec, check_holder,
                    check_sigma_membership, strict_floor)


def _indicator_from(grid, x):
    """1{z >= x} on the grid, one half at bitwise-equal nodes."""
    return (grid > x).astype(float) + 0.5 * (grid == x)


@dataclass(frozen=True, eq=False)
class InfluenceKernel:
    """h(z, x) = (1{z >= x} - F(z)) / rho(z), the efficient influence
    function for pointwise density estimation."""

    inv: object

    def evaluate(self, x):
        """h(., x) tabulated on the invariant-model grid."""
        inv = self.inv
        return (_indicator_from(inv.grid, x) - inv.cdf) / inv.rho

    def tail_bound_report(self, slack=1.10):
        """Both tails of |h(., x)| rho should stay below 1/(2 gamma)."""
        inv = self.inv
        gamma = inv.model.class_gamma
        a = inv.model.class_a
        right = inv.grid > a
        left = inv.grid < -a
        hi = float(np.max((1.0 - inv.cdf[right]) / inv.rho[right]))
        lo = float(np.max(inv.cdf[left] / inv.rho[left]))
        bound = 1.0 / (2.0 * gamma) * slack
        return {"passed": hi <= bound and lo <= bound,
                "right_tail": hi, "left_tail": lo, "bound": bound}


def _cov_prefactor(inv, x, y):
    return 4.0 * float(inv.rho_at(x)) * float(inv.rho_at(y))


def limit_covariance(inv, x, y):
    """Donsker limit covariance H(x, y), evaluated through the scale
    function and total speed: 4 m(R) rho(x) rho(y)
    int (1{z>=x} - F)(1{z>=y} - F) s'(z) dz with s' = exp(-int 2b)."""
    grid = inv.grid
    if not (grid[0] <= x <= grid[-1] and grid[0] <= y <= grid[-1]):
        raise DomainError("x, y must lie in the tabulation range")
    f1 = _indicator_from(grid, x) - inv.cdf
    f2 = _indicator_from(grid, y) - inv.cdf
    with np.errstate(over="ignore"):
        sprime = np.exp(-inv.log_integrand)
    integrand = np.where((f1 == 0.0) | (f2 == 0.0), 0.0, f1 * f2 * sprime)
    val = inv.speed_total * float(np.trapezoid(integrand, dx=inv.spacing))
    out = _cov_prefactor(inv, x, y) * val
    if not math.isfinite(out):
        raise TailNotResolved("limit covariance integrand not resolved")
    return out


def optimal_covariance(inv, x, y):
    """Covariance CR(x, y) of the optimal Gaussian limit process:
    4 rho(x) rho(y) int h(z, x) h(z, y) rho(z) dz."""
    grid = inv.grid
    if not (grid[0] <= x <= grid[-1] and grid[0] <= y <= grid[-1]):
        raise DomainError("x, y must lie in the tabulation range")
    h1 = (_indicator_from(grid, x) - inv.cdf) / inv.rho
    h2 = (_indicator_from(grid, y) - inv.cdf) / inv.rho
    val = float(np.trapezoid(h1 * h2 * inv.rho, dx=inv.spacing))
    return _cov_prefactor(inv, x, y) * val


def cramer_rao_point(inv, y):
    """Pointwise Cramer--Rao bound ||2 rho(y) h(., y)||^2_{L2(mu)}.

    Coincides with the limit covariance on the diagonal.
    """
    h = InfluenceKernel(inv).evaluate(y)
    w = (2.0 * float(inv.rho_at(y)) * h) ** 2 * inv.rho
    return float(np.trapezoid(w, dx=inv.spacing))


def generator_apply(values, grid, model):
    """Apply the generator f -> b f' + f''/2 to a tabulated function.

    Central differences inside, one-sided values copied at the two edge
    points (use interior values only).
    """
    values = np.asarray(values, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if values.size < 5:
        raise GridTooCoarse("need at least 5 points for second differences")
    spacing = grid[1] - grid[0]
    if not np.allclose(np.diff(grid), spacing, rtol=1e-9, atol=0.0):
        raise GridTooCoarse("generator_apply requires a uniform grid")
    fp = np.gradient(values, spacing)
    fpp = np.empty_like(values)
    fpp[1:-1] = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / spacing**2
    fpp[0] = fpp[1]
    fpp[-1] = fpp[-2]
    return model.drift(grid) * fp + 0.5 * fpp


@dataclass(frozen=True, eq=False)
class PoissonSolution:
    """Solution T of the Poisson equation L_b T = g - mu(g), tabulated."""

    grid: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    mean_g: float

    def grad_norm_sq(self, inv):
        """||T'||^2_{L2(mu)}."""
        return float(np.trapezoid(self.derivative**2 * inv.rho,
                                  dx=inv.spacing))


def poisson_solve(g_values, inv):
    """Solve the Poisson equation for a compactly supported g.

    T(z) = int_0^z [ (1-F(u))/rho(u) G(u) - F(u)/rho(u) (G_tot - G(u)) ] du
    with G(u) = int_{-R}^u 2 g rho; the bracket is T' and satisfies
    L_b T = g - mu(g).

    Raises
    ------
    TailNotResolved
        If g does not vanish within one unit of the grid ends.
    """
    g_values = np.asarray(g_values, dtype=float)
    if g_values.shape != inv.grid.shape:
        raise DomainError("g must be tabulated on the invariant-model grid")
    margin = inv.grid[np.nonzero(g_values)[0]]
    if margin.size and (margin[0] < inv.grid[0] + 1.0
                        or margin[-1] > inv.grid[-1] - 1.0):
        raise TailNotResolved("g support reaches the tabulation boundary")
    g1 = cumulative_trapezoid(2.0 * g_values * inv.rho, dx=inv.spacing,
                              initial=0.0)
    total = g1[-1]
    t_prime = ((1.0 - inv.cdf) * g1 - inv.cdf * (total - g1)) / inv.rho
    t_vals = cumulative_trapezoid(t_prime, dx=inv.spacing, initial=0.0)
    center = int(np.argmin(np.abs(inv.grid)))
    t_vals = t_vals - t_vals[center]
    return PoissonSolution(inv.grid, t_vals, t_prime, float(total / 2.0))


def covariance_quadratic_form(inv, g_values):
    """Double integral int int g(x) H(x, y) g(y) dy dx.

    Evaluated row by row: for fixed x the inner y-integral uses the
    suffix cumulative of h(., x), which with the half-node indicator
    convention reproduces the pointwise trapezoid sums exactly.
    """
    g_values = np.asarray(g_values, dtype=float)
    grid, rho, cdf = inv.grid, inv.rho, inv.cdf
    support = np.nonzero(g_values)[0]
    if support.size == 0:
        return 0.0
    sel = np.arange(support[0], support[-1] + 1)
    dx = inv.spacing

    # suffix trapezoid of an array: out[j] = trapz(arr[j:])
    def suffix_trapz(arr):
        panels = 0.5 * dx * (arr[:-1] + arr[1:])
        out = np.zeros(arr.size)
        out[:-1] = panels[::-1].cumsum()[::-1]
        return out

    total = 0.0
    rows = np.empty(sel.size)
    for row_idx, i in enumerate(sel):
        x = grid[i]
        hx = (_indicator_from(grid, x) - cdf) / rho
        sfx = suffix_trapz(hx)
        const = float(np.trapezoid(hx * cdf, dx=dx))
        i_xy = sfx[sel] - const
        hrow = 4.0 * rho[i] * rho[sel] * i_xy
        rows[row_idx] = np.trapezoid(g_values[sel] * hrow, dx=dx)
    total = float(np.trapezoid(g_values[sel] * rows, dx=dx))
    return total


@dataclass(frozen=True)
class BoundConstants:
    """Named stand-ins for the unspecified constants in the concentration
    bounds; all default to one, making the bounds shape diagnostics rather
    than certified envelopes."""

    c_hat: float = 1.0
    c_hat0: float = 1.0
    nu1: float = 1.0
    nu2: float = 1.0
    nu3: float = 1.0
    eta_bar1: float = 1.0
    eta_bar2: float = 1.0

    def __post_init__(self):
        for name in ("c_hat", "c_hat0", "nu1", "nu2", "nu3",
                     "eta_bar1", "eta_bar2"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")


def _check_thu(t, h, u):
    if u < 1.0:
        raise DomainError("u must be >= 1")
    if not 0.0 < h < 1.0:
        raise DomainError("h must lie in (0, 1)")
    if t < 1.0:
        raise DomainError("t must be >= 1")


def derivative_concentration_bound(t, h, u, constants=BoundConstants()):
    """Deviation bound for the stochastic-integral estimator (sup-norm).

    Seven-term display; increasing in u, vanishing as t -> infinity at
    fixed (h, u).
    """
    _check_thu(t, h, u)
    lg = math.log(u * t / h)
    c = constants
    return c.c_hat * (
        (lg**1.5 + lg**0.5 + u**1.5) / math.sqrt(t)
        + u / (t * h)
        + math.exp(-c.c_hat0 * t) / h
        + math.sqrt(lg / (t * h))
        + lg / (t**0.75 * math.sqrt(h))
        + (math.sqrt(u) + u / t**0.25) / math.sqrt(t * h)
    )


def density_bound_bias(h, spec, kernel):
    """Bias part L h^(beta+1) / floor(beta+1)! * int |v^(beta+1) K(v)| dv."""
    if h == 0.0:
        return 0.0
    return (spec.L * h ** (spec.beta + 1.0)
            / math.factorial(strict_floor(spec.beta + 1.0))
            * kernel.abs_moment(spec.beta + 1.0))


def density_concentration_bound(t, h, u, spec, kernel,
                                constants=BoundConstants()):
    """Deviation bound for the kernel invariant-density estimator."""
    _check_thu(t, h, u)
    c = constants
    stoch = (c.nu1 / math.sqrt(t)
             * (1.0 + math.sqrt(math.log(1.0 / math.sqrt(h)))
                + math.sqrt(math.log(u * t)) + math.sqrt(u))
             + c.nu2 * u / t
             + math.exp(-c.nu3 * t) / h)
    return stoch + density_bound_bias(h, spec, kernel)


def derivative_tail_bound(t, h, u, rho_sup, constants=BoundConstants()):
    """Explicit-constant tail bound sqrt(||rho||_inf) *
    ( 2 eta_bar1 sqrt(log(ut/h)/(th)) + eta_bar2 sqrt(u/(th)) )."""
    _check_thu(t, h, u)
    if rho_sup <= 0:
        raise DomainError("rho_sup must be positive")
    c = constants
    lg = math.log(u * t / h)
    return math.sqrt(rho_sup) * (2.0 * c.eta_bar1 * math.sqrt(lg / (t * h))
                                 + c.eta_bar2 * math.sqrt(u / (t * h)))


def tail_bound_in_regime(t, h, u, alpha=1.0):
    """Validity range of the explicit tail bound:
    h in ((log t)^2/t, (log t)^-3) and u <= alpha log t."""
    lt = math.log(t)
    return (lt**2 / t < h < lt**-3) and (u <= alpha * lt)


# -- lower-bound hypothesis family ---------------------------------------

_Q_GRID = np.linspace(-0.5, 0.5, 20001)


def perturbation_scale(beta):
    """Scale c making c * (u exp(-1/(1-4u^2))) lie in H(beta+1, 1/2).

    The class norm is estimated on a fine grid (sup-norms of derivatives
    up to the strict floor plus the top Hoelder seminorm) and the scale is
    set so the estimate equals 1/2.
    """
    vals = odd_bump(_Q_GRID)
    spec = HolderSpec(beta + 1.0, 1.0)
    rep = check_holder(vals, spec, _Q_GRID)
    norm = max(max(rep.sup_norms), rep.seminorm)
    return 0.5 / norm


@dataclass(frozen=True, eq=False)
class HypothesisMember:
    j: int
    center: float
    rho: np.ndarray = field(repr=False)
    drift_values: np.ndarray = field(repr=False)
    model: DriftModel = None


@dataclass(frozen=True, eq=False)
class HypothesisSet:
    """Additive-bump perturbations of a base invariant density, used as a
    worst-case test corpus for derivative/drift estimation."""

    base_inv: object
    holder: HolderSpec
    class_c: float
    class_a: float
    class_gamma: float
    v: float
    t: float
    h_t: float
    q_scale: float
    members: tuple

    @property
    def centers(self):
        return tuple(m.center for m in self.members)

    def separation_bound(self):
        """L h_t^beta |Q'(0)| with the constructed bump scaling."""
        q_prime0 = self.q_scale * float(odd_bump_prime(0.0))
        return self.holder.L * self.h_t ** self.holder.beta * abs(q_prime0)


def build_hypotheses(base_model, base_inv, spec, class_c, v, t,
                     positivity_floor=1e-3):
    """Construct the perturbed family rho_j = rho_0 + G_j.

    G_j(x) = L h_t^(beta+1) Q((x - x_j)/h_t) with Q the scaled odd bump,
    h_t = v (log t / t)^(1/(2 beta + 1)), centers x_j = 2 h_t j for
    j = 0, +-1, ..., +-(floor(A/(2 h_t)) - 1).  The base drift must lie in
    the halved class (growth constant class_c/2, Hoelder radius L/2); each
    member then lies in the full class.  Every invariant is verified
    before returning.
    """
    if not 0.0 < v < 1.0:
        raise DomainError("v must lie in (0, 1)")
    if t <= math.e:
        raise DomainError("t too small")
    beta, big_l = spec.beta, spec.L
    a = base_model.class_a
    gamma = base_model.class_gamma

    if class_c < 2.0:
        raise HypothesisInvalid(
            "growth_constant", "class_c must be >= 2 so the halved class "
            "keeps a growth constant >= 1")
    base_membership = check_sigma_membership(
        replace(base_model, class_c=class_c / 2.0))
    if not base_membership.passed:
        raise HypothesisInvalid("base_membership",
                                f"{len(base_membership.violations)} probes")
    base_holder = check_holder(base_inv.rho,
                               HolderSpec(beta + 1.0, big_l / 2.0),
                               base_inv.grid)
    if not base_holder.passed:
        raise HypothesisInvalid("base_smoothness",
                                f"seminorm {base_holder.seminorm:.4g}")

    h_t = v * (math.log(t) / t) ** (1.0 / (2.0 * beta + 1.0))
    n_side = int(math.floor(a / (2.0 * h_t))) - 1
    if n_side < 0:
        raise HypothesisInvalid("empty_index_set",
                                f"h_t = {h_t:.4g} too large for A = {a}")
    js = [0] + [s * k for k in range(1, n_side + 1) for s in (1, -1)]
    q_scale = perturbation_scale(beta)
    amp = big_l * h_t ** (beta + 1.0) * q_scale

    grid = base_inv.grid
    rho0 = base_inv.rho
    members = []
    full_spec = HolderSpec(beta + 1.0, big_l)
    for j in js:
        center = 2.0 * h_t * j
        amp_j = 0.0 if j == 0 else amp  # null member keeps the base density
        u = (grid - center) / h_t
        g = amp_j * odd_bump(u)
        rho_j = rho0 + g
        window = np.abs(grid) <= a
        if float(np.min(rho_j[window])) < positivity_floor:
            raise HypothesisInvalid(
                "positivity", f"min rho_j = {np.min(rho_j[window]):.3e} "
                "(horizon too small for this perturbation)")
        if np.any(rho_j < 0):
            raise HypothesisInvalid("nonnegativity")
        mass = float(np.trapezoid(rho_j, dx=base_inv.spacing))
        if abs(mass - 1.0) > 1e-6:
            raise HypothesisInvalid("unit_mass", f"mass = {mass:.8f}")
        hol = check_holder(rho_j, full_spec, grid)
        if not hol.passed:
            raise HypothesisInvalid(
                "smoothness", f"j = {j}, seminorm {hol.seminorm:.4g}")
        model_j = DriftModel.bump_perturbed(base_model, amp_j, center, h_t,
                                            base_inv=base_inv,
                                            holder=full_spec)
        model_j = replace(model_j, class_c=class_c)
        membership = check_sigma_membership(model_j)
        if not membership.passed:
            raise HypothesisInvalid(
                "class_membership",
                f"j = {j}, {len(membership.violations)} probes")
        members.append(HypothesisMember(j, center, rho_j,
                                        model_j.drift(grid), model_j))

    hset = HypothesisSet(base_inv, spec, class_c, a, gamma, v, float(t),
                         h_t, q_scale, tuple(members))
    rep = validate_hypotheses(hset)
    if not rep["passed"]:
        bad = [k for k, ok in rep.items() if ok is False]
        raise HypothesisInvalid(",".join(bad))
    return hset


def validate_hypotheses(hset):
    """Re-check every HypothesisSet invariant; returns a dict report."""
    inv0 = hset.base_inv
    grid = inv0.grid
    report = {}
    masses = [float(np.trapezoid(m.rho, dx=inv0.spacing))
              for m in hset.members]
    report["unit_mass"] = all(abs(m - 1.0) <= 1e-6 for m in masses)
    report["nonnegative"] = bool(all(np.all(m.rho >= 0)
                                     for m in hset.members))
    full_spec = HolderSpec(hset.holder.beta + 1.0, hset.holder.L)
    report["smoothness"] = all(
        check_holder(m.rho, full_spec, grid).passed for m in hset.members)
    report["class_membership"] = all(
        check_sigma_membership(m.model).passed for m in hset.members)

    centers = [m.center for m in hset.members]
    gaps = [abs(c1 - c2) for i, c1 in enumerate(centers)
            for c2 in centers[i + 1:]]
    report["disjoint_supports"] = all(g >= 2.0 * hset.h_t * (1 - 1e-12)
                                      for g in gaps)

    bound = hset.separation_bound()
    sups = [float(np.max(np.abs(np.gradient(m.rho - inv0.rho,
                                            inv0.spacing))))
            for m in hset.members]
    if len(sups) >= 2:
        worst = min(max(sups[i], sups[k])
                    for i in range(len(sups))
                    for k in range(i + 1, len(sups)))
    else:
        worst = float("inf")
    report["derivative_separation"] = bool(worst >= bound)
    report["separation_bound"] = bound
    report["separation_observed"] = worst
    report["passed"] = all(val for key, val in report.items()
                           if isinstance(val, bool))
    return report


@dataclass(frozen=True)
class NormalityReport:
    ks_statistic: float
    p_value: float
    n: int


def normality_check(samples, target_var):
    """One-sample Kolmogorov--Smirnov test of samples / sqrt(target_var)
    against the standard normal (asymptotic p-value)."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 100:
        raise TooFewSamples(f"{samples.size} < 100 samples")
    if target_var <= 0:
        raise DomainError("target variance must be positive")
    res = kstest(samples / math.sqrt(target_var), "norm")
    return NormalityReport(float(res.statistic), float(res.pvalue),
                           samples.size)
