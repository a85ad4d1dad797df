"""YAML experiment configuration: schema, loading, hashing.

Schema (all blocks optional unless noted; defaults in parentheses):

    model:                       # required
      family: ou | tanh | bump | tabulated
      gamma: 1.0                 # ou
      amplitude, slope, shift    # tanh
      base: {...}, amplitude, center, width   # bump (base is a model block)
      grid_file: path.csv        # tabulated: CSV with x,b columns
      class_c, class_a, class_gamma          # class constants
    holder: {beta: 1.0, L: 1.2}  # smoothness of the invariant density - 1
    kernel: triangular           # or smooth-order-N
    grid: {radius: null, spacing: 0.001}     # invariant-density tabulation
    sim: {step: 0.01, init: stationary, init_value: 0.0}
    mc:
      t_grid: [500, 1000, 2000, 4000]
      replications: 100
      master_seed: 1
      targets: [density]         # density|derivative|drift|simultaneous|
                                 # efficiency|donsker|lowerbound
    selection:
      eta: 1.25
      mode: calibrated           # theoretical|override|calibrated
      factor: 4.0e-4             # calibrated: sqrt(M) multiplier
      bdg, c_tilde2, entropy_v   # theoretical ingredients
      eta_bar1, eta_bar2, c      # override values
      oracle_m: 1.0              # M used by the oracle-bandwidth pipeline
    bounds: {c_hat: 1, c_hat0: 1, nu1: 1, nu2: 1, nu3: 1,
             eta_bar1: 1, eta_bar2: 1}
    window: {pad: 2.0, spacing_cap: 0.01}
    efficiency: {points: [0.0, 0.5]}
    lowerbound: {v: 0.5}
"""

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .asymptotics import BoundConstants
from .errors import DomainError
from .kernels import kernel_by_name
from .lepski import CalibrationConstants
from .model import DriftModel, HolderSpec

VALID_TARGETS = ("density", "derivative", "oracle", "drift", "simultaneous",
                 "efficiency", "donsker", "lowerbound")


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    model: DriftModel
    holder: HolderSpec
    kernel: object
    t_grid: tuple
    step: float = 0.01
    init: str = "stationary"
    init_value: float = 0.0
    replications: int = 100
    master_seed: int = 1
    targets: tuple = ("density",)
    eta: float = 1.25
    calibration: CalibrationConstants = None
    oracle_m: float = 1.0
    bounds: BoundConstants = field(default_factory=BoundConstants)
    grid_radius: float = None
    grid_spacing: float = 1e-3
    window_pad: float = 2.0
    spacing_cap: float = 0.01
    efficiency_points: tuple = (0.0, 0.5)
    lowerbound_v: float = 0.5
    threads: int = 1

    def __post_init__(self):
        if self.replications < 2:
            raise DomainError("need at least 2 replications")
        if len(self.t_grid) == 0 or any(
                b <= a for a, b in zip(self.t_grid, self.t_grid[1:])):
            raise DomainError("t_grid must be non-empty and increasing")
        for tgt in self.targets:
            if tgt not in VALID_TARGETS:
                raise DomainError(f"unknown target {tgt!r}")
        if self.threads < 1:
            raise DomainError("threads must be >= 1")


def model_from_dict(spec):
    family = spec.get("family")
    holder = None
    common = {k: spec[k] for k in ("class_c", "class_a", "class_gamma")
              if k in spec}
    if family == "ou":
        return DriftModel.ornstein_uhlenbeck(
            gamma=spec.get("gamma", 1.0), holder=holder, **common)
    if family == "tanh":
        return DriftModel.tanh_shift(
            amplitude=spec.get("amplitude", 1.0),
            slope=spec.get("slope", 1.0), shift=spec.get("shift", 0.0),
            holder=holder, **common)
    if family == "bump":
        base = model_from_dict(spec["base"])
        return DriftModel.bump_perturbed(
            base, amplitude=spec.get("amplitude", 0.05),
            center=spec.get("center", 0.0), width=spec.get("width", 0.5))
    if family == "tabulated":
        data = np.loadtxt(spec["grid_file"], delimiter=",", skiprows=1)
        return DriftModel.tabulated(data[:, 0], data[:, 1], **common)
    raise DomainError(f"unknown model family {family!r}")


def load_config(path):
    """Parse a YAML experiment file into an ExperimentConfig."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict) or "model" not in raw:
        raise DomainError("config must be a mapping with a 'model' block")
    model = model_from_dict(raw["model"])
    hol = raw.get("holder", {})
    holder = HolderSpec(hol.get("beta", 1.0), hol.get("L", 1.2))
    kernel = kernel_by_name(raw.get("kernel", "triangular"))

    sel = raw.get("selection", {})
    calibration = CalibrationConstants(
        kernel_l2=kernel.l2_norm,
        bdg=sel.get("bdg", math.sqrt(2.0)),
        c_tilde2=sel.get("c_tilde2", 1.0),
        entropy_v=sel.get("entropy_v", 2.0),
        mode=sel.get("mode", "calibrated"),
        override_eta_bar1=sel.get("eta_bar1"),
        override_eta_bar2=sel.get("eta_bar2"),
        override_c=sel.get("c"),
        factor=sel.get("factor", 4.0e-4),
    )
    bounds = BoundConstants(**raw.get("bounds", {}))
    mc = raw.get("mc", {})
    sim = raw.get("sim", {})
    grid = raw.get("grid", {})
    window = raw.get("window", {})
    return ExperimentConfig(
        model=model, holder=holder, kernel=kernel,
        t_grid=tuple(float(t) for t in mc.get("t_grid", [500.0])),
        step=sim.get("step", 0.01),
        init=sim.get("init", "stationary"),
        init_value=sim.get("init_value", 0.0),
        replications=int(mc.get("replications", 100)),
        master_seed=int(mc.get("master_seed", 1)),
        targets=tuple(mc.get("targets", ["density"])),
        eta=sel.get("eta", 1.25),
        calibration=calibration,
        oracle_m=sel.get("oracle_m", 1.0),
        bounds=bounds,
        grid_radius=grid.get("radius"),
        grid_spacing=grid.get("spacing", 1e-3),
        window_pad=window.get("pad", 2.0),
        spacing_cap=window.get("spacing_cap", 0.01),
        efficiency_points=tuple(raw.get("efficiency", {})
                                .get("points", [0.0, 0.5])),
        lowerbound_v=raw.get("lowerbound", {}).get("v", 0.5),
    )


def config_hash(path):
    """SHA-256 of the raw config file bytes (recorded in run manifests)."""
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
