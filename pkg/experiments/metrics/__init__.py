from .distances import chamfer
from .emd import emd, emd_approx, emd_exact
from .frechet import GaussianStats, feature_stats, frechet, gaussian_stats
from .linalg import ConvergenceError, jacobi_eigh, sqrtm_psd
from .report import MetricReport, evaluate_sets
from .sets import coverage, mmd, pairwise_distances
from .stability import StabilityReport, fpd_stability
