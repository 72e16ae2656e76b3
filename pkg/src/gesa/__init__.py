"""GESA: fair, explainable candidate-role allocation."""

__version__ = "0.1.0"

from gesa.model import (  # noqa: F401
    AllocationPlan,
    Candidate,
    ConstraintSet,
    Dataset,
    DemographicProfile,
    ObjectiveVector,
    Role,
    validate_dataset,
)
