"""Knowledge-graph embeddings built on circular correlation.

Core pieces: pure circular correlation/convolution kernels with naive
and FFT backends (`ops`), five scoring families with analytic gradients
(`models`), mini-batch AdaGrad training with negative sampling
(`training`), the filtered ranking protocol and average precision
(`evaluation`), TSV/vocabulary handling plus the countries benchmark
builder (`data`, `countries`), and a holographic associative memory
(`memory`).
"""

__version__ = "0.1.0"

from .data import Triple, TripleStore, build_store, load_store, parse_triples
from .models import EmbeddingSet, ModelSpec, init_params, parameter_count, score, score_gradients
from .ops import Backend, ccorr, cconv, delta, involution
from .training import TrainConfig, train

__all__ = [
    "Backend",
    "EmbeddingSet",
    "ModelSpec",
    "Triple",
    "TripleStore",
    "TrainConfig",
    "build_store",
    "ccorr",
    "cconv",
    "delta",
    "init_params",
    "involution",
    "load_store",
    "parameter_count",
    "parse_triples",
    "score",
    "score_gradients",
    "train",
    "__version__",
]
