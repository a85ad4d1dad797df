"""Kernel-based estimators computed from a diffusion path.

Four estimators share one discretisation convention: sums run over the
left endpoints X_{t_0}, ..., X_{t_{n-1}}, i.e. the Riemann/Ito
discretisation of the corresponding time or stochastic integral.  The
stochastic integral uses the forward increment (Ito, never midpoint).

Sup-norm functionals are evaluated on a finite window, by default
[-A - 2, A + 2]: the invariant density decays exponentially beyond the
reversion radius A, so the truncated region carries negligible risk.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _native
from .errors import (BandwidthOutOfRange, DenominatorNonpositive, DomainError,
                     GridMismatch)

TAGS = ("density", "derivative", "drift", "localtime")


@dataclass(frozen=True, eq=False)
class FunctionEstimate:
    """Estimator values over a spatial grid, with bandwidth provenance."""

    x: np.ndarray
    values: np.ndarray
    bandwidth: float
    horizon: float
    tag: str

    def __post_init__(self):
        if self.x.shape != self.values.shape:
            raise GridMismatch("x and values length mismatch")
        if self.x.size > 1 and np.any(np.diff(self.x) <= 0):
            raise DomainError("evaluation grid must increase strictly")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("estimate contains non-finite values")
        if self.tag not in TAGS:
            raise DomainError(f"unknown tag {self.tag!r}")


def eval_grid(class_a, bandwidth, pad=2.0, spacing_cap=0.01):
    """Uniform window [-(A+pad), A+pad] with spacing min(h/10, cap)."""
    spacing = min(bandwidth / 10.0, spacing_cap)
    half = int(math.ceil((class_a + pad) / spacing))
    return np.arange(-half, half + 1) * spacing


def _check_bandwidth(h):
    if not 0.0 < h < 1.0:
        raise BandwidthOutOfRange(f"bandwidth {h} outside (0, 1)")


def _uniform_spacing(x_grid):
    if x_grid.size < 2:
        return None
    d = np.diff(x_grid)
    if np.allclose(d, d[0], rtol=1e-12, atol=0.0):
        return float(d[0])
    return None


def _kernel_sums(path, kernel, h, x_grid, weights):
    samples = path.values[:-1]
    kind, params = kernel.native_spec()
    x_grid = np.ascontiguousarray(x_grid, dtype=float)
    dx = _uniform_spacing(x_grid)
    if dx is not None and x_grid.size > 8:
        return _native.kernel_sums(samples, weights, x_grid, dx,
                                   kind, params, h)
    return _native.kernel_sums_points(samples, weights, x_grid,
                                      kind, params, h)


def _antiderivative_table(kernel, n=20001):
    u = np.linspace(-0.5, 0.5, n)
    vals = kernel(u)
    ik = np.empty(n)
    ik[0] = 0.0
    np.cumsum(0.5 * (vals[1:] + vals[:-1]) * (u[1] - u[0]), out=ik[1:])
    return ik


def _segment_sums(path, kernel, h, x_grid):
    kind, params = kernel.native_spec()
    ik = _antiderivative_table(kernel)
    x_grid = np.ascontiguousarray(x_grid, dtype=float)
    a, b = path.values[:-1], path.values[1:]
    dx = _uniform_spacing(x_grid)
    if dx is not None and x_grid.size > 8:
        return _native.kernel_segment_sums(a, b, x_grid, dx, kind, params,
                                           ik, h)
    return _native.kernel_segment_sums_points(a, b, x_grid, kind, params,
                                              ik, h)


def density_kde(path, kernel, h, x_grid, discretization="left"):
    """Kernel invariant-density estimate.

    With the default "left" discretisation,
    values[j] = (1/(n h)) sum_i K((x_j - X_{t_i})/h) over the n left
    endpoints, the Riemann discretisation of
    (th)^{-1} int_0^t K((x-X_u)/h) du.  "segment" evaluates the same time
    integral exactly along the linearly interpolated path (the kernel
    averaged over each chord); it discretises the identical continuous
    object but stays accurate when the one-step motion sqrt(step) exceeds
    the bandwidth, which matters for limit-variance studies.
    """
    _check_bandwidth(h)
    n = path.values.size - 1
    if n < 1:
        raise DomainError("path must contain at least one increment")
    if discretization == "left":
        sums = _kernel_sums(path, kernel, h, x_grid, np.ones(n))
    elif discretization == "segment":
        sums = _segment_sums(path, kernel, h, x_grid)
    else:
        raise DomainError(f"unknown discretization {discretization!r}")
    return FunctionEstimate(np.asarray(x_grid, float), sums / (n * h), h,
                            path.horizon, "density")


def derivative_estimator(path, kernel, h, x_grid):
    """Stochastic-integral estimate of rho'/2 = b rho.

    values[j] = (1/(t h)) sum_i K((x_j - X_{t_i})/h) (X_{t_{i+1}} - X_{t_i});
    the kernel is evaluated at the forward (left) endpoint of each
    increment, which is the Ito convention and is mandatory here.
    """
    _check_bandwidth(h)
    if path.values.size < 2:
        raise DomainError("path must contain at least one increment")
    incr = np.diff(path.values)
    sums = _kernel_sums(path, kernel, h, x_grid, incr)
    return FunctionEstimate(np.asarray(x_grid, float),
                            sums / (path.horizon * h), h,
                            path.horizon, "derivative")


def denominator_ridge(t):
    """Additive regulariser sqrt(log t / t) * exp(sqrt(log t))."""
    if t <= 1.0:
        raise DomainError("ridge requires t > 1")
    lt = math.log(t)
    return math.sqrt(lt / t) * math.exp(math.sqrt(lt))


@dataclass(frozen=True)
class DriftDenominatorSpec:
    """Bandwidth policy for the density in the drift denominator.

    kind "universal" uses t^{-1/2} (the bandwidth-free efficient choice);
    kind "simultaneous" reuses the simultaneous selected bandwidth.
    """

    kind: str = "universal"
    bandwidth: float = None

    def resolve(self, t):
        if self.kind == "universal":
            return t ** -0.5
        if self.kind == "simultaneous":
            if self.bandwidth is None:
                raise DomainError("simultaneous spec needs a bandwidth")
            return self.bandwidth
        raise DomainError(f"unknown denominator kind {self.kind!r}")


def drift_estimator(num, den, t):
    """Regularised Nadaraya--Watson quotient of the two estimates.

    values = num / (den + ridge(t)); the ridge keeps the denominator away
    from zero in the tails.  Signed-kernel density estimates may dip below
    zero and are deliberately not clipped; if den + ridge is non-positive
    anywhere the combination is pathological and an error is raised.
    """
    if num.tag != "derivative":
        raise DomainError("numerator must be a derivative estimate")
    if den.tag != "density":
        raise DomainError("denominator must be a density estimate")
    if num.x.shape != den.x.shape or not np.array_equal(num.x, den.x):
        raise GridMismatch("drift estimator needs a shared grid")
    ridge = denominator_ridge(t)
    d = den.values + ridge
    if np.any(d <= 0):
        raise DenominatorNonpositive(
            f"density + ridge reaches {d.min():.3e}")
    return FunctionEstimate(num.x, num.values / d, num.bandwidth, t, "drift")


def local_time_estimator(path, x_grid, eps):
    """Occupation-density estimate of t^{-1} L_t^x.

    values[j] = (1/t) * step * #{i < n : |X_{t_i} - x_j| < eps} / (2 eps).
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    x_grid = np.asarray(x_grid, dtype=float)
    samples = np.sort(path.values[:-1])
    hi = np.searchsorted(samples, x_grid + eps, side="left")
    lo = np.searchsorted(samples, x_grid - eps, side="right")
    counts = (hi - lo).astype(float)
    values = path.step * counts / (path.horizon * 2.0 * eps)
    return FunctionEstimate(x_grid, values, eps, path.horizon, "localtime")


def default_local_time_eps(step):
    """Bin half-width max(2 sqrt(step), 1e-3): must exceed one-step motion."""
    return max(2.0 * math.sqrt(step), 1e-3)


def _values_of(other):
    if isinstance(other, FunctionEstimate):
        return other.x, other.values
    other = np.asarray(other, dtype=float)
    return None, other


def sup_distance(a, b):
    """max_j |a[j] - b[j]| over the shared grid.

    ``b`` may be another estimate (grids must match exactly) or a plain
    array of truth values tabulated on a's grid.
    """
    bx, bv = _values_of(b)
    if bx is not None and not np.array_equal(a.x, bx):
        raise GridMismatch("sup_distance needs identical grids")
    if a.values.shape != bv.shape:
        raise GridMismatch("sup_distance needs equal lengths")
    return float(np.max(np.abs(a.values - bv)))


def weighted_drift_error(bhat, model, inv):
    """Sup over the grid of |(bhat - b) * rho^2|, the drift risk weight."""
    b = model.drift(bhat.x)
    w = inv.rho_at(bhat.x) ** 2
    return float(np.max(np.abs((bhat.values - b) * w)))
