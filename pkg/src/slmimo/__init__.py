"""Sparse layered MIMO: structure, analysis, detection, design, simulation."""

__version__ = "0.1.0"

from .channel import (ChannelRealization, EigenSpectrum, MimoConfig,
                      SvdConvergenceError, observe, sample_channel,
                      svd_ordered)
from .structure import (Codebook, CodebookSet, DifferenceSet, SLMatrix,
                        analyze_matrix, check_design_condition,
                        difference_set, leading_zeros, load_codebooks,
                        load_sl_matrix, save_codebooks, save_sl_matrix,
                        superpose, superposed_alphabet)
from .eigenstats import (CancellationError, MonomialExpansion,
                         expand_ordered_pdf, joint_mgf,
                         mean_ordered_eigenvalues, nested_integral)
from .awep import (AwepReport, DominantSet, PepBoundTerms, asymptotic_awep,
                   awep_upper_bound, avg_pep_upper, diversity_gain,
                   dominant_set, pep_conditional)
from .detectors import (DetectorInput, MessageTable, exact_marginals,
                        ml_detect, mp_detect)
from .design import (BaseConstellation, DesignResult, build_base,
                     baseline_codebooks, design_codebooks,
                     maximize_min_weighted_distance, optimize_scaling_step,
                     rotation_angles)
from .sim import (CurvePoint, SimConfig, compare_systems, convergence_study,
                  run_curve)
from . import matrices
