"""Numerical charts for diffeomorphism groups and spaces of fibrations
on flat tori.

The package stores smooth maps between tori as periodic displacement
fields over fixed coordinate-selection references, and builds on that
one representation: certified inversion and composition, vertical
tubular projections, principal-bundle charts for the fibration-preserving
action, orbit maps and their local sections, base-action trivializations,
and horizontal transport along paths of fibrations.
"""

from .errors import (DriftExceeded, FibrationError, InvalidCoordinate,
                     InvalidFactor, InversionFailed, MaxDepthExceeded,
                     NonConvergence, NotADiffeomorphism, NotInChartDomain,
                     NotInV1, NotInW, OutsideTube, RankDeficient,
                     ShapeMismatch)
from .gridmap import (Certificate, GridMap, Reference, compose,
                      coordinate_projection, diffeo_certificate, evaluate,
                      identity_map, invert, jacobian, sample_map,
                      submersion_certificate, sup_distance,
                      vector_valued_map, verification_grid)
from .gmapio import read_gmap, write_gmap
from .torus import (Point, TorusShape, grid_nodes, minimal_difference,
                    square_torus, torus_distance, wrap)
from .tubular import (FiberMetric, TubularProjection, conformal_metric,
                      default_radius, flat_metric, project_graph)
from .chart import (ChartedDiffeo, chart_assemble, chart_at, chart_decompose,
                    slice_residual, verticality_residual)
from .orbit import (CosetResult, FactorizationResult, connect_chain,
                    coset_equal, factorize, graph_section, push_fibration,
                    section_exchange, swap_projection)
from .baseaction import (GlobalSection, SplitSection, assemble_base,
                         fiber_spectral_energy, global_section,
                         lift_vector_field, section_pullback, slice_defect,
                         split_section, trivialize)
from .transport import (AnalyticPath, SampledPath, TimeTerm, TransportResult,
                        cos_term, horizontal_velocity, loop_submersion_check,
                        poly_term, sin_term, transport_path)
from .config import ConfigError, RunConfig, load_config
from .verify import run_verify
from .convergence import run_study

__version__ = "0.1.0"
