"""Average age of information in a cooperative status-update system.

A source streams randomly generated status updates to a destination over a
lossy direct link, helped by a relay that opportunistically retransmits
updates it decoded; fresh arrivals preempt stale copies everywhere. The
package provides exact closed forms for the long-run average age and the
cycle-interval moments, the optimal update-generation probability (closed
form on its proven domain plus a numerical fallback), and a reproducible
slotted Monte Carlo simulator that validates every formula.
"""

__version__ = "0.1.0"

from .analytic import (
    MomentBundle,
    average_aoi,
    average_aoi_noncooperative,
    expected_delivery_time,
    expected_delivery_time_sq,
    expected_interdeparture,
    expected_service_time,
    expected_waiting_moments,
    moments,
)
from .model import (
    CycleRecord,
    DerivedConstants,
    Holder,
    LinkProbabilities,
    ParameterError,
    ProtocolState,
    SimulationSummary,
    SystemParams,
    UndeliverableError,
    derive_constants,
)
from .optimizer import (
    OptimalBranch,
    OptimumResult,
    SignCaseAudit,
    SlopeQuadratic,
    audit_derivative_signs,
    audit_sign_cases,
    branch_threshold,
    numerical_optimal_p,
    optimal_p,
    slope_quadratic,
)
from .simulator import (
    CycleRecords,
    CycleStatistics,
    Mode,
    SimulationConfig,
    SlotOutcome,
    cycle_statistics,
    run,
    run_replication,
    run_with_records,
    step,
)

__all__ = [
    "CycleRecord",
    "CycleRecords",
    "CycleStatistics",
    "DerivedConstants",
    "Holder",
    "LinkProbabilities",
    "Mode",
    "MomentBundle",
    "OptimalBranch",
    "OptimumResult",
    "ParameterError",
    "ProtocolState",
    "SignCaseAudit",
    "SimulationConfig",
    "SimulationSummary",
    "SlopeQuadratic",
    "SlotOutcome",
    "SystemParams",
    "UndeliverableError",
    "audit_derivative_signs",
    "audit_sign_cases",
    "average_aoi",
    "average_aoi_noncooperative",
    "branch_threshold",
    "cycle_statistics",
    "derive_constants",
    "expected_delivery_time",
    "expected_delivery_time_sq",
    "expected_interdeparture",
    "expected_service_time",
    "expected_waiting_moments",
    "moments",
    "numerical_optimal_p",
    "optimal_p",
    "run",
    "run_replication",
    "run_with_records",
    "slope_quadratic",
    "step",
]
