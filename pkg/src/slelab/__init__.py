"""Simulation toolkit for SLE curves with force points: driving processes,
Loewner chains, chart changes, hull geometry and seeded experiments."""
from .constants import (InvalidKappa, SleConstants, WeightVector, BoundaryClass, boundary_value,
                        classify_boundary_interval, derive_constants, flow_line_weights)
from .driving import DrivingPath, sample_driving
from .loewner import TracePath, compute_trace, forward_map, inverse_map
from .conformal import DomainChart, map_point, swap_endpoints_map
from .experiments import (TestReport, duality_test, estimate_lpp, hitting_stats, ks_two_sample,
                          reflection_test, reversal_test)

__all__ = [
    "InvalidKappa", "SleConstants", "WeightVector", "BoundaryClass", "boundary_value",
    "classify_boundary_interval", "derive_constants", "flow_line_weights", "DrivingPath",
    "sample_driving", "TracePath", "compute_trace", "forward_map", "inverse_map", "DomainChart",
    "map_point", "swap_endpoints_map", "TestReport", "duality_test", "estimate_lpp",
    "hitting_stats", "ks_two_sample", "reflection_test", "reversal_test",
]
