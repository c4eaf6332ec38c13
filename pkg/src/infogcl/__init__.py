"""Information-aware graph contrastive learning.

Pipeline: augment a graph into two views, encode them with a GCN or GIN
backbone plus projection head, and contrast the chosen aggregations with
InfoNCE or a negative-free cosine loss. The ``infomeasure`` module scores
augmentations, encoders and contrastive modes by mutual-information
estimates and checks the optimality conditions exactly on enumerable
synthetic processes.
"""

from .augment import AugmentationSpec, View, align_views, apply_augmentation, make_view_pair
from .contrast import ContrastBatch, ModeSpec, ScoreFn, apply_mode, infonce_loss, negfree_loss
from .encoder import EncoderSpec, Representations, encode, encode_graphs, init_params
from .errors import (AlignmentError, ConfigError, DivergenceError, DomainError, FormatError, IngestError,
                     InfoGCLError, NeedNegativesError, NumericError, ShapeError, StratificationError)
from .graph import Graph, GraphDataset, NodeTaskDataset, load_node_task, parse_tu_dataset, validate_graph
from .infomeasure import (DiscreteJoint, MiEstimate, SelectionReport, compute_ib_objective, discrete_mi,
                          label_mi_proxy, mi_lower_bound_from_nce, score_augmentation_pair, select_augmentations,
                          select_encoder, select_mode, verify_corollary1, verify_corollary2, verify_corollary3,
                          view_summary)
from .pipeline import EvalResult, TrainConfig, ablate_negatives, linear_eval, train
from .optim import adam_step
from .rng import SplitMix64, derive_seed
from .synthetic import SyntheticProcess, generate_synthetic_graphs, two_factor_process

__version__ = "0.1.0"
