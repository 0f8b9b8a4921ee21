"""Mini-batch SARAH with random Barzilai-Borwein step sizes, baselines and a benchmark harness."""
from .data import Dataset, Example, SyntheticSpec, generate_synthetic, normalize_rows, parse_libsvm
from .linalg import SparseVector, axpy_sparse, dot, norm_sq
from .objective import EvalCounter, LogisticL2, ObjectiveConstants, RidgeL2
from .solvers import Method, RunTrace, SolverConfig, run
from .stepsize import EpochBBRule, FixedRule, RBBRule, SafeguardPolicy
from .theory import TheoryInputs, TheoryReport

__version__ = "0.1.0"
