"""adpnet: length-constrained average-distance network solver and
verification suite."""

from .errors import (AdpnetError, DegenerateGeometryError, MollificationError,
                     ParseError, SingularIntegrandError, UnsupportedRegimeError,
                     ValidationError)
from .functional import (BarycentreField, FDReport, LipschitzField,
                         barycentre_field, fd_check, first_variation, j_p,
                         j_soft, mollify, net_field)
from .measure import (DensitySpec, DiscreteMeasure, HullSummary, hull_summary,
                      load_measure, sample_density)
from .network import (Network, SampledNetwork, TopologyReport, simplify,
                      subdivide, topology_report, total_length)
from .perturb import (BoundReport, CompetitorSpec, ProbeResult, bound_check,
                      competitor, cross, cross_dist_sq, deform,
                      local_dimension_probe, shrink)
from .projection import (ProjectionTable, PushforwardMeasure, ambiguous_mass,
                         project, project_bruteforce, pushforward)
from .solver import (SolveResult, SolverConfig, SweepResult, enforce_length,
                     init_network, snap_to_vertex, solve, sweep)
from .verify import (DiagnosticsReport, RegimeInfo, SoftReport, check_minimizer,
                     check_soft, diagnostics_for_network, power_bounds,
                     regime_table)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
