"""Detection of sparse matrices in Gaussian noise and in covariance models.

Submodules: :mod:`~sparsedet.matrix` (norms, sparsity), :mod:`~sparsedet.priors`
(signal and noise generators), :mod:`~sparsedet.detectors` (tests),
:mod:`~sparsedet.scan` (scan statistic), :mod:`~sparsedet.witness` (small
submatrices carrying the spectral norm), :mod:`~sparsedet.divergence`
(chi-square calculators, boundary curves) and :mod:`~sparsedet.experiment`
(Monte Carlo sweeps).
"""
from .detectors import (TestReport, calibrate_cov_scan_threshold, chi2_threshold, cov_chi2_scan_test,
                        cov_threshold_test, default_scan_size, frob_chi2_statistic,
                        mean_chi2_scan_test, mean_threshold_test, q_statistic, sample_covariance,
                        scan_threshold, threshold_estimate, threshold_level)
from .divergence import (BoundaryPoint, Chi2Estimate, beta_star, boundary_curves,
                         chi2_gaussian_mixture_mc, chi2_prior_exact, chi2_upper_bound_cs,
                         cov_chi2_pair_term, cov_lower_bound_advisory, lambda0, lambda1, mgf_gh_exact,
                         mgf_h_exact, optimize_s_star, permutation_mgf, tv_upper_from_chi2)
from .errors import (BudgetExceededError, ConvergenceError, InvalidInputError, SparseDetError,
                     UndefinedValueError)
from .experiment import (ExperimentConfig, PhaseTable, emit_phase_csv, emit_phase_plot,
                         run_experiment)
from .matrix import (frobenius_norm_sq, induced_norms, is_k_sparse, read_matrix, spectral_norm,
                     stable_rank, submatrix, write_matrix)
from .priors import (PriorSample, SignalSpec, add_gaussian_noise, gen_block_signal, gen_permutation,
                     gen_prior_sample, sample_gaussian_data, symmetrize)
from .rng import RngSeed
from .scan import ScanConfig, ScanResult, scan_statistic
from .witness import (WitnessReport, calibrate_c_w, energy_split, find_witness, sparse_corner_draw,
                      rv_row_sample)

__version__ = "0.1.0"
