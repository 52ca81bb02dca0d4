"""Self-supervised node representations via masked latent prediction.

A student encoder sees a graph whose masked nodes carry a learnable token and
predicts the node embeddings that an EMA teacher computes on the full graph.
"""
from .encoder import Encoder, EncoderConfig
from .evaluation import Metrics, ProbeConfig, evaluate_run, kmeans_accuracy, linear_probe
from .graph import Graph, Split, homophily_ratio, laplacian_quadratic, normalize_adjacency
from .ssl import TrainConfig, train, train_encoder_decoder

__version__ = "0.1.0"
