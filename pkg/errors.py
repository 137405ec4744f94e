"""Exception hierarchy shared by every module.

Each class carries a machine-readable ``code`` and the process ``exit_code``
the command line maps it to.
"""


class DrlpError(Exception):
    code = "ERROR"
    exit_code = 1

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.details = details


# --- Input problems (exit 2) ---
class InputError(DrlpError):
    code = "INPUT_ERROR"
    exit_code = 2


class ModelError(InputError, ValueError):
    """Dimension or value mismatch in model data; message names the field."""
    code = "MODEL_ERROR"


class SchemaError(InputError):
    code = "SCHEMA_ERROR"


class SampleOutsideSupportError(ModelError):
    code = "SAMPLE_OUTSIDE_SUPPORT"


class EmptyIntersectionError(ModelError):
    code = "EMPTY_INTERSECTION"


class VertexCapError(InputError):
    code = "VERTEX_CAP"


class ScenarioCapError(InputError):
    code = "SCENARIO_CAP"


# --- Infeasible or ill-posed problems (exit 1) ---
class InfeasibleError(DrlpError):
    code = "INFEASIBLE"
    exit_code = 1


class AffineInfeasibleError(InfeasibleError):
    code = "AFFINE_INFEASIBLE"


class RecourseInfeasibleError(InfeasibleError):
    code = "RECOURSE_INFEASIBLE"

    def __init__(self, message: str = "", xi=None, **details):
        super().__init__(message, **details)
        self.xi = xi


class ExactInfeasibleError(InfeasibleError):
    code = "EXACT_INFEASIBLE"


class CertificationError(InfeasibleError):
    code = "CERTIFICATE_FAILED"


class UnboundedError(InfeasibleError):
    code = "UNBOUNDED"


# --- Numerical trouble (exit 3) ---
class NumericalError(DrlpError):
    code = "NUMERICAL"
    exit_code = 3


class NumericalInstabilityError(NumericalError):
    code = "NUMERICAL_INSTABILITY"


class ToleranceError(NumericalError):
    code = "TOLERANCE"


class IterationLimitError(NumericalError):
    code = "ITERATION_LIMIT"


class NodeLimitError(NumericalError):
    code = "NODE_LIMIT"


class PolicyBoundError(NumericalError):
    code = "POLICY_BOUND"


ERROR_MESSAGES = {
    0: "success",
    1: "problem infeasible or unbounded",
    2: "input error",
    3: "numerical failure",
}
