"""novocap: a desk-scale captioner that can name objects absent from its
paired image-caption training data.

Three objectives share one parameter set: a caption loss on paired data, a
multi-label image loss on labeled images, and a next-word loss on raw
text. Word embeddings are tied between the input lookup and the output
projection, so words seen only in the unpaired sources inherit behaviour
from their semantic neighbours.
"""

from .autodiff import Tensor, finite_diff_check, no_grad
from .config import RunConfig
from .datasynth import WorldSpec, generate_world, make_heldout_split
from .decoding import beam_decode, greedy_decode, sample_rank_decode
from .fusion import CaptionModel
from .training import JointTrainer, LossBreakdown, TrainConfig, joint_step
from .vocab import EmbeddingTable, Vocabulary

__version__ = "0.1.0"

__all__ = [
    "Tensor", "finite_diff_check", "no_grad",
    "Vocabulary", "EmbeddingTable",
    "CaptionModel", "TrainConfig", "LossBreakdown", "JointTrainer", "joint_step",
    "WorldSpec", "generate_world", "make_heldout_split",
    "greedy_decode", "beam_decode", "sample_rank_decode",
    "RunConfig",
    "__version__",
]
