"""Exception types shared across the simulator."""


class EvsrError(Exception):
    """Base class for all simulator errors."""


class SubcriticalAngle(EvsrError):
    """Incidence angle at or below the critical angle: no evanescent field."""


class SingularSystem(EvsrError):
    """Steady-state linear system is rank-deficient beyond the trace constraint."""


class StepSizeUnderflow(EvsrError):
    """Adaptive integrator cannot meet tolerance at the minimum step size."""


class NonConvergedQuadrature(EvsrError):
    """Velocity quadrature changed too much when orders were doubled."""


class NoDipFound(EvsrError):
    """Requested window contains no absorption dip above the noise floor."""


class SweepAborted(EvsrError):
    """A sweep point failed; carries the offending probe detuning (rad/s)."""

    def __init__(self, detuning: float, message: str):
        self.detuning = detuning
        super().__init__(f"sweep aborted at detuning {detuning / (2.0 * 3.141592653589793):.6g} Hz: {message}")


class ConfigInvalid(EvsrError):
    """Configuration failed validation; carries all violations, not just the first."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{field}: {msg}" for field, msg in self.violations)
        super().__init__(f"invalid configuration: {lines}")


class ParseError(EvsrError):
    """Config file could not be parsed (message includes line information)."""


class NumericalFailure(EvsrError):
    """A numerical stage failed; carries the stage name and parameters."""

    def __init__(self, stage: str, detail: str):
        self.stage = stage
        super().__init__(f"{stage}: {detail}")
