"""Sample-path generation for dX = b(X) dt + dW on a fine uniform grid.

Paths are produced by the Euler--Maruyama scheme with noise from the
counter-based Philox generator, so a path is a pure function of
(model, config, seed) and safe to regenerate in any worker.  The drift is
consumed as a uniform table (linear interpolation), keeping one code path
for every drift family.
"""

import struct
from dataclasses import dataclass

import numpy as np

from . import _native
from .errors import Blowup, DomainError

MAGIC = b"DLPATH1"
_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    init_kind is one of "stationary" (inverse-CDF draw from the tabulated
    invariant law), "fixed" (start at init_value) or "burnin" (run for
    init_value extra time units from 0 and discard them).  The only scheme
    is Euler--Maruyama; with unit diffusion coefficient the Milstein
    correction vanishes, so there is nothing to gain from higher order.
    """

    horizon: float
    step: float = 1e-2
    init_kind: str = "stationary"
    init_value: float = 0.0
    scheme: str = "euler"

    def __post_init__(self):
        if self.step <= 0 or self.horizon <= 0:
            raise DomainError("horizon and step must be positive")
        if self.step > self.horizon:
            raise DomainError("step must not exceed the horizon")
        if self.init_kind not in ("stationary", "fixed", "burnin"):
            raise DomainError(f"unknown init {self.init_kind!r}")
        if self.scheme != "euler":
            raise DomainError(f"unknown scheme {self.scheme!r}")

    @property
    def n_steps(self):
        return int(round(self.horizon / self.step))


@dataclass(frozen=True, eq=False)
class DiffusionPath:
    """A realised path on the uniform grid t_i = i * step."""

    times: np.ndarray
    values: np.ndarray
    seed: int
    config: SimConfig

    def __post_init__(self):
        if self.times.shape != self.values.shape:
            raise DomainError("times/values length mismatch")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("path contains non-finite values")

    @property
    def horizon(self):
        return self.config.horizon

    @property
    def step(self):
        return self.config.step

    @classmethod
    def from_values(cls, values, step, seed=0):
        """Wrap raw values as a path (hand-constructed test inputs)."""
        values = np.asarray(values, dtype=float)
        n = values.size - 1
        cfg = SimConfig(horizon=n * step, step=step, init_kind="fixed",
                        init_value=float(values[0]))
        return cls(np.arange(n + 1) * step, values, seed, cfg)


def path_rng(seed):
    """Philox generator keyed by a 64-bit seed (documented algorithm)."""
    return np.random.Generator(np.random.Philox(key=seed & _SEED_MASK))


def sample_stationary_initial(inv, rng, size=None):
    """Draw from the tabulated invariant law by inverse-CDF interpolation."""
    u = rng.random(size)
    return inv.quantile(u)


def _drift_table(model, inv):
    reach = 10.0 * inv.radius
    return model.drift_table(-reach, reach, inv.spacing)


def simulate_path(model, inv, cfg, seed, noise=None):
    """Euler--Maruyama path X_{i+1} = X_i + b(X_i) dt + sqrt(dt) xi_i.

    The generator is keyed by ``seed``; under stationary initialisation a
    single uniform is consumed first for the inverse-CDF draw, then the
    Gaussian increments.  ``noise`` overrides the Gaussian draws (test
    hook, e.g. a zero array isolates the deterministic recursion).

    Raises
    ------
    Blowup
        If |X_i| exceeds ten times the invariant-model grid radius,
        signalling a non-ergodic drift specification or too large a step.
    """
    rng = path_rng(seed)
    if cfg.init_kind == "stationary":
        x0 = float(sample_stationary_initial(inv, rng))
        burn = 0
    elif cfg.init_kind == "fixed":
        x0 = cfg.init_value
        burn = 0
    else:
        x0 = 0.0
        burn = int(round(cfg.init_value / cfg.step))

    n = cfg.n_steps
    if noise is None:
        noise = rng.standard_normal(burn + n)
    else:
        noise = np.asarray(noise, dtype=float)
        if noise.size != burn + n:
            raise DomainError("noise length must match the step count")

    grid, drift_values = _drift_table(model, inv)
    values, blown = _native.euler_path(
        x0, cfg.step, noise, grid[0], 1.0 / inv.spacing, drift_values,
        10.0 * inv.radius)
    if blown >= 0:
        raise Blowup(f"path left |x| <= {10.0 * inv.radius:g} at step {blown}")
    if burn:
        values = values[burn:]
    return DiffusionPath(np.arange(n + 1) * cfg.step, values, seed, cfg)


def path_increments(path):
    """Forward differences X_{i+1} - X_i (length n)."""
    return np.diff(path.values)


def write_path_binary(path, filename):
    """Flat binary path format.

    Layout: magic b"DLPATH1", then horizon, step (little-endian float64),
    seed (little-endian uint64), then the values as little-endian float64.
    """
    with open(filename, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<ddQ", path.config.horizon, path.config.step,
                             path.seed & _SEED_MASK))
        fh.write(path.values.astype("<f8").tobytes())


def read_path_binary(filename):
    with open(filename, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise DomainError(f"bad magic {magic!r} in {filename}")
        horizon, step, seed = struct.unpack("<ddQ", fh.read(24))
        values = np.frombuffer(fh.read(), dtype="<f8").astype(float)
    cfg = SimConfig(horizon=horizon, step=step, init_kind="fixed",
                    init_value=float(values[0]))
    return DiffusionPath(np.arange(values.size) * step, values, seed, cfg)


def write_path_csv(path, filename):
    np.savetxt(filename, np.column_stack([path.times, path.values]),
               delimiter=",", header="t,x", comments="", fmt="%.17g")
