"""Sampled scaled relative graphs and graph-separation stability certificates."""

from .certifier import (AssumptionChecklist, Certificate, certify_hard, certify_passivity_corollary,
                        certify_soft, checklist_from_specs, homotopy_step_bound, validate_certificate)
from .errors import (ConfigError, DimensionMismatchError, DivergenceError, DomainError, EmptyCloudError,
                     EvaluationError, IndeterminateDistanceError, SrgLabError, WellPosednessError)
from .feedback import (GainConfig, LoopTrace, SolverConfig, estimate_loop_incremental_gain, solve_feedback,
                       wellposedness_probe)
from .operators import (LTI, Integrator, Negate, ParallelSum, Scale, Series, StaticNonlinearity, evaluate,
                        identity, lag, static_gain, zero_operator)
from .regions import (Disk, HalfPlane, HullOfCloud, ImaginaryAxis, SectorDisk, Union, containment_report,
                      invert_region, make_sector_disk_D, negate_region, region_distance, scale_region)
from .sampler import (ExcitationConfig, SrgCloud, cloud_min_distance, invert_cloud, negate_cloud,
                      sample_hard_srg, sample_soft_srg, scale_cloud)
from .signals import SampledSignal, gain, gain_phase, gain_phase_T, inner_product, norm, phase, truncate

__version__ = "0.1.0"
