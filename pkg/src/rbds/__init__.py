"""Block-diagonal low-rank + sparse representation learning (RBDS).

Learns a class-labelled dictionary and a representation whose entries
concentrate in same-class blocks, classifies with a closed-form ridge
classifier, and benchmarks against fixed-dictionary ablations and RPCA
under pixel corruption and block occlusion.
"""

from .baselines import RpcaResult, fit_lrrs, fit_lrrs_bd, fit_rpca_lrrs, rpca
from .classifier import ClassifierModel, evaluate, predict, train_classifier
from .coder import CodingResult, code
from .datagen import (CorruptionSpec, SubspaceSpec, corrupt, corrupt_block, corrupt_pixels,
                      gen_subspaces)
from .mask import MaskA, build_mask, complement, offblock_energy, offblock_ratio
from .matrix_io import (LabeledDataset, load_labels, load_matrix, normalize_columns, one_hot,
                        save_labels, save_matrix)
from .prox import soft_threshold, svt
from .solver import (ConfigError, Dictionary, DivergenceError, RbdsModel, SolverConfig,
                     SolverState, check_convergence, fit_rbds, init_dictionary)

__version__ = "0.1.0"
