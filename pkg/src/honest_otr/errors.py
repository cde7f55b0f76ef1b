"""Exception hierarchy.

Every error carries a module-qualified ``code`` (``"<module>.<Name>"``) that the
CLI echoes in its structured stderr payload.
"""


class HonestOTRError(Exception):
    module = "honest_otr"

    @property
    def code(self):
        return f"{self.module}.{type(self).__name__}"


# -- core_data ---------------------------------------------------------------

class DataError(HonestOTRError):
    module = "core_data"


class MissingColumn(DataError):
    pass


class NonBinaryTreatment(DataError):
    pass


class NonNumericCell(DataError):
    pass


class TooFewRows(DataError):
    pass


class ConstantColumn(DataError):
    def __init__(self, j, name=None):
        self.j = j
        label = f"{j}" if name is None else f"{j} ({name})"
        super().__init__(f"covariate column {label} has zero sample variance")


class PropensityMissing(DataError):
    pass


class PropensityOutOfRange(DataError):
    pass


# -- kernel_smoother ---------------------------------------------------------

class DegenerateDenominator(HonestOTRError):
    module = "kernel_smoother"

    def __init__(self, i=None):
        self.i = i
        where = "" if i is None else f" at point {i}"
        super().__init__(f"kernel weight denominator is zero or non-finite{where}")


# -- profiled_estimator ------------------------------------------------------

class EstimatorError(HonestOTRError):
    module = "profiled_estimator"


class NonFinite(EstimatorError):
    pass


class EmptyGrid(EstimatorError):
    pass


# -- dantzig_debias ----------------------------------------------------------

class DebiasError(HonestOTRError):
    module = "dantzig_debias"


class Infeasible(DebiasError):
    pass


class Unbounded(DebiasError):
    pass


class IterationLimit(DebiasError):
    pass


class SolverFailure(DebiasError):
    pass


class ZeroTau(DebiasError):
    def __init__(self, j, value):
        self.j = j
        self.value = value
        super().__init__(f"tau_j^2 = {value:.3e} is numerically zero for coordinate {j}")


class AlphaOutOfRange(HonestOTRError):
    module = "dantzig_debias"


# -- bootstrap_inference -----------------------------------------------------

class EmptyGroup(HonestOTRError):
    module = "bootstrap_inference"


class InvalidGroup(HonestOTRError):
    module = "bootstrap_inference"


class TooFewDraws(HonestOTRError):
    module = "bootstrap_inference"


# -- observational -----------------------------------------------------------

class PropensityError(HonestOTRError):
    module = "observational"


class Separation(PropensityError):
    pass


class NonConvergence(PropensityError):
    pass


# -- simulation_bench --------------------------------------------------------

class SimulationError(HonestOTRError):
    module = "simulation_bench"


class UnknownDesign(SimulationError):
    pass


class LengthMismatch(SimulationError):
    pass


class NoMatches(SimulationError):
    pass
