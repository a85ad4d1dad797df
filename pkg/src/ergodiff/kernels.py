"""Kernel functions supported on [-1/2, 1/2].

Kernels are Lipschitz, symmetric and of a prescribed order (all moments
up to the order vanish).  Order 1 is the triangular kernel; higher orders
are built as even polynomials times a smooth bump, which makes them
signed.  Nonnegativity is therefore waived for order >= 2 and the waiver
is reported by :func:`validate_kernel`.
"""

from dataclasses import dataclass, field

import numpy as np

from .bumps import smooth_bump
from .errors import DomainError, SingularMomentSystem

# native evaluator codes, shared with _native.py
KIND_TRIANGULAR = 0
KIND_POLY_BUMP = 1
KIND_TABLE = 2

_QUAD_POINTS = 200_001  # fine trapezoid for kernel moment integrals


def _quad_grid():
    return np.linspace(-0.5, 0.5, _QUAD_POINTS)


@dataclass(frozen=True)
class Kernel:
    """A kernel with its order, norms and moment table.

    Attributes
    ----------
    name : str
        Config-file name ("triangular", "smooth-order-N", or custom).
    order : int
        Largest m such that ``int u^k K(u) du = 0`` for 1 <= k <= m.
    lipschitz_const : float
        Grid estimate of sup |K'|.
    l2_norm : float
        ||K||_{L^2}.
    moments : ndarray
        ``moments[k] = int u^k K(u) du`` for k = 0 .. order+1.
    """

    name: str
    order: int
    kind: int
    params: np.ndarray = field(repr=False)
    lipschitz_const: float = 0.0
    l2_norm: float = 0.0
    moments: np.ndarray = field(default=None, repr=False)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == KIND_TRIANGULAR:
            out = np.where(np.abs(u) <= 0.5, 2.0 - 4.0 * np.abs(u), 0.0)
        elif self.kind == KIND_POLY_BUMP:
            u2 = u * u
            p = np.zeros_like(u)
            for c in self.params[::-1]:
                p = p * u2 + c
            out = p * smooth_bump(u)
        else:  # dense table, linear interpolation
            m = self.params.shape[0]
            step = 1.0 / (m - 1)
            out = np.where(
                np.abs(u) <= 0.5,
                np.interp(u, -0.5 + step * np.arange(m), self.params),
                0.0,
            )
        return out if out.ndim else float(out)

    def abs_moment(self, beta):
        """``int |K(v)| |v|^beta dv`` by fine trapezoid quadrature."""
        if beta <= 0:
            raise DomainError("abs_moment requires beta > 0")
        v = _quad_grid()
        return float(np.trapezoid(np.abs(self(v)) * np.abs(v) ** beta, v))

    def table(self, n=2001):
        """Dense (u, K(u)) table, e.g. for CSV export."""
        u = np.linspace(-0.5, 0.5, n)
        return u, self(u)

    def native_spec(self):
        """(kind, params) pair consumed by the compiled evaluators."""
        return self.kind, self.params


def _finish(name, order, kind, params):
    u = _quad_grid()
    k = Kernel(name, order, kind, np.asarray(params, dtype=float))
    vals = k(u)
    lip = float(np.max(np.abs(np.diff(vals))) / (u[1] - u[0]))
    l2 = float(np.sqrt(np.trapezoid(vals * vals, u)))
    moms = np.array(
        [np.trapezoid(vals * u**j, u) for j in range(order + 2)]
    )
    return Kernel(name, order, kind, k.params, lip, l2, moms)


def make_kernel(order):
    """Construct a kernel of the given order (>= 1).

    Order 1 returns the triangular kernel K(u) = 2 - 4|u| on [-1/2, 1/2].
    Higher orders solve the even-moment system for an even polynomial
    multiplying the smooth bump; odd moments vanish by symmetry.

    Raises
    ------
    SingularMomentSystem
        If the moment matrix has condition number above 1e12.
    """
    order = int(order)
    if order < 1:
        raise DomainError("kernel order must be >= 1")
    if order == 1:
        return _finish("triangular", 1, KIND_TRIANGULAR, np.empty(0))

    u = _quad_grid()
    phi = smooth_bump(u)
    ncoef = order // 2 + 1
    # A[i, j] = int u^{2i} * u^{2j} * phi(u) du ; rhs picks out mass one
    mus = np.array([np.trapezoid(u ** (2 * m) * phi, u) for m in range(2 * ncoef)])
    a = np.array([[mus[i + j] for j in range(ncoef)] for i in range(ncoef)])
    if np.linalg.cond(a) > 1e12:
        raise SingularMomentSystem(
            f"moment matrix condition number {np.linalg.cond(a):.3e}"
        )
    rhs = np.zeros(ncoef)
    rhs[0] = 1.0
    coeffs = np.linalg.solve(a, rhs)
    return _finish(f"smooth-order-{order}", order, KIND_POLY_BUMP, coeffs)


def kernel_from_callable(func, name="custom", order=0, n=20001):
    """Wrap an arbitrary function on [-1/2, 1/2] as a table-backed kernel.

    Intended for tests and cross-implementation comparisons; the stated
    order is taken on trust.
    """
    u = np.linspace(-0.5, 0.5, n)
    vals = np.asarray([func(x) for x in u], dtype=float)
    return _finish(name, order, KIND_TABLE, vals)


def kernel_by_name(name):
    """Resolve a config-file kernel name."""
    if name == "triangular":
        return make_kernel(1)
    if name.startswith("smooth-order-"):
        return make_kernel(int(name.rsplit("-", 1)[1]))
    raise DomainError(f"unknown kernel name {name!r}")


def validate_kernel(kernel, alpha, spec):
    """Check a kernel against a smoothness target.

    Passes iff ``kernel.order >= strict_floor(alpha)``, ``alpha >= beta + 1``
    and the kernel invariants hold (support, symmetry, moments, Lipschitz).
    Returns a dict report; ``nonnegativity_waived`` flags signed kernels.
    """
    from .model import strict_floor

    checks = {}
    checks["order_ok"] = kernel.order >= strict_floor(alpha)
    checks["alpha_ok"] = alpha >= spec.beta + 1.0

    u = np.linspace(-0.5, 0.5, 4001)
    vals = kernel(u)
    checks["support_ok"] = bool(
        kernel(np.array([-0.75, 0.75, 2.0])).max(initial=0.0) == 0.0
    )
    checks["symmetry_ok"] = bool(np.max(np.abs(vals - vals[::-1])) <= 1e-12)
    moms = kernel.moments
    checks["mass_ok"] = bool(abs(moms[0] - 1.0) <= 1e-10)
    checks["moments_ok"] = bool(
        all(abs(moms[k]) <= 1e-8 for k in range(1, kernel.order + 1))
    )
    lip = np.max(np.abs(np.diff(vals))) / (u[1] - u[0])
    checks["lipschitz_ok"] = bool(lip <= kernel.lipschitz_const * (1 + 1e-6) + 1e-12)
    nonneg = bool(vals.min() >= -1e-12)
    report = {
        "passed": all(checks.values()),
        "checks": checks,
        "nonnegativity_waived": not nonneg,
        "order": kernel.order,
        "alpha": alpha,
        "beta": spec.beta,
    }
    return report


def abs_moment(kernel, beta):
    """Module-level alias for :meth:`Kernel.abs_moment`."""
    return kernel.abs_moment(beta)
