"""Evanescent-wave selective-reflection spectra of a pumped four-level vapor."""

__version__ = "0.1.0"

from .bloch import (
    DensityMatrix,
    TrajectoryResult,
    build_interaction,
    integrate_trajectory,
    lindblad_relaxation,
    local_steady_state,
    obe_rhs,
    propagate_time,
)
from .errors import (
    ConfigInvalid,
    EvsrError,
    NoDipFound,
    NonConvergedQuadrature,
    NumericalFailure,
    ParseError,
    SingularSystem,
    StepSizeUnderflow,
    SubcriticalAngle,
    SweepAborted,
)
from .kernel import available_backends, get_backend
from .optics import (
    critical_angle,
    evanescent_kappa,
    fresnel_reflectivity,
    refractive_index_from_chi,
    thermal_velocity,
)
from .params import (
    ArrivingBC,
    ChiWeighting,
    ComplexRefraction,
    DriveParams,
    ExperimentConfig,
    NumericsParams,
    PrismGeometry,
    PumpGeometry,
    SweepParams,
    VaporParams,
)
from .velocity import VelocityGrid, build_velocity_grid

__all__ = [name for name in dir() if not name.startswith("_")]
