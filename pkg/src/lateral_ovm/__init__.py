"""Two-lane optimal-velocity car-following model with lateral coupling.

Submodules: ``model`` (OV functions, acceleration law), ``stability``
(long-wave linear stability), ``mkdv`` (kink-antikink solution),
``simulator`` (two-lane ring road), ``config``/``cli`` (manifests and
commands). The ring kernel is compiled when available; see ``kernels``.
"""
from .kernels import BACKEND
from .mkdv import MkdvCoefficients, coexisting_curve, kink_headway, mkdv_coefficients, soliton_amplitude
from .model import (
    ModelParams,
    NeighborView,
    acceleration,
    lateral_optimal_velocity,
    lateral_velocity_difference,
    optimal_velocity,
    ov_derivative,
)
from .simulator import (
    PerturbationSpec,
    RingConfig,
    SimOptions,
    SimulationAborted,
    TrajectoryRecord,
    initialize,
    measure_amplitude,
    standard_ring,
    run,
    step,
)
from .stability import Classification, OperatingPoint, StabilityReport, classify, neutral_sensitivity

__version__ = "0.1.0"
