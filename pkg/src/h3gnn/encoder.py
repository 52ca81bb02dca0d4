"""Joint structural node encoder.

Each node gets four C-dim tokens: a linear projection of its raw features,
a node-wise MLP, a 1-layer weighted GCN and a 2-layer weighted GCN. A single
Transformer block attends across those four tokens (never across nodes) and
the result is flattened to a 4C embedding.

Weight matrices are stored as (in, out) so every projection is ``x @ W + b``.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import tensorcore as tc
from .graph import Graph, NormalizedAdjacency
from .tensorcore import DimensionError, EdgePattern, StateError, Tensor

CHECKPOINT_VERSION = 1
NUM_TOKENS = 4


@dataclass
class EncoderConfig:
    input_dim: int
    token_dim: int = 128
    heads: int = 4
    wgcn_hidden: int = 64
    dropout_filters: float = 0.5
    dropout_attention: float = 0.1
    attention: bool = True  # False swaps the Transformer block for a node-wise MLP

    def __post_init__(self):
        if self.token_dim % self.heads:
            raise ValueError(f"token_dim {self.token_dim} is not divisible by heads {self.heads}")
        for p in (self.dropout_filters, self.dropout_attention):
            if not 0.0 <= p < 1.0:
                raise ValueError(f"dropout probability must be in [0, 1), got {p}")

    @property
    def head_dim(self) -> int:
        return self.token_dim // self.heads

    @property
    def embed_dim(self) -> int:
        return NUM_TOKENS * self.token_dim


def wgcn_layer(pattern: EdgePattern, edge_weights, h, w, activation: str | None = "relu") -> Tensor:
    """sigma(A_w @ h @ w) where A_w carries ``edge_weights`` on ``pattern``.

    The product is evaluated as A_w @ (h @ w). ``activation=None`` leaves the
    propagation linear.
    """
    out = tc.spmm(pattern, edge_weights, tc.matmul(h, w))
    if activation == "relu":
        return tc.relu(out)
    if activation is None:
        return out
    raise ValueError(f"unsupported activation {activation!r}")


def gcn_propagate(adj: NormalizedAdjacency, h: np.ndarray) -> np.ndarray:
    """Plain GCN propagation with the fixed normalized adjacency."""
    return adj.matrix @ h


def project_linear(params: dict, f) -> Tensor:
    return tc.linear(f, params["lin.W"], params["lin.b"])


def project_mlp(params: dict, f, prefix: str = "mlp") -> Tensor:
    hidden = tc.gelu(tc.linear(f, params[f"{prefix}.W1"], params[f"{prefix}.b1"]))
    return tc.linear(hidden, params[f"{prefix}.W2"], params[f"{prefix}.b2"])


def fuse_tokens(params: dict, stack, heads: int, dropout: float = 0.0, rng=None,
                training: bool = False, return_attention: bool = False):
    """One Transformer block over each node's (S=4, C) token sequence.

    Multi-head attention with 1/sqrt(head_dim) scaling, output projection,
    layer-norm residual, then MLP and a second layer-norm residual.
    """
    stack = tc.as_tensor(stack)
    n, s, c_all = stack.shape
    c = c_all // heads

    def split_heads(z):
        return tc.transpose(tc.reshape(z, (n, s, heads, c)), (0, 2, 1, 3))

    q = split_heads(tc.matmul(stack, params["attn.Wq"]))
    k = split_heads(tc.matmul(stack, params["attn.Wk"]))
    v = split_heads(tc.matmul(stack, params["attn.Wv"]))
    scores = tc.scale(tc.matmul(q, tc.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(c))
    attn = tc.softmax_rows(scores)
    attn_used = tc.dropout(attn, dropout, rng, training)
    mixed = tc.reshape(tc.transpose(tc.matmul(attn_used, v), (0, 2, 1, 3)), (n, s, c_all))
    y = tc.add(stack, tc.layer_norm(tc.matmul(mixed, params["attn.Wo"]), params["ln1.g"], params["ln1.b"]))
    out = tc.add(y, tc.layer_norm(project_mlp(params, y, "ffn"), params["ln2.g"], params["ln2.b"]))
    return (out, attn) if return_attention else out


def init_params(cfg: EncoderConfig, adj: NormalizedAdjacency, seed=0) -> dict[str, Tensor]:
    rng = np.random.default_rng(seed)
    d, C, hid = cfg.input_dim, cfg.token_dim, cfg.wgcn_hidden

    def w(shape, name):
        return tc.glorot_init(shape, rng, name=name)

    def edges(name):
        # start at the normalized adjacency so the layer is exactly a GCN
        return Tensor(adj.values.copy(), requires_grad=True, name=name)

    p = {
        "lin.W": w((d, C), "lin.W"), "lin.b": tc.zeros(C, "lin.b"),
        "mlp.W1": w((d, 4 * C), "mlp.W1"), "mlp.b1": tc.zeros(4 * C, "mlp.b1"),
        "mlp.W2": w((4 * C, C), "mlp.W2"), "mlp.b2": tc.zeros(C, "mlp.b2"),
        "wgcn1.e": edges("wgcn1.e"), "wgcn1.W": w((d, C), "wgcn1.W"),
        "wgcn2.e": edges("wgcn2.e"), "wgcn2.W1": w((d, hid), "wgcn2.W1"), "wgcn2.W2": w((hid, C), "wgcn2.W2"),
    }
    if cfg.attention:
        p.update({
            "attn.Wq": w((C, C), "attn.Wq"), "attn.Wk": w((C, C), "attn.Wk"),
            "attn.Wv": w((C, C), "attn.Wv"), "attn.Wo": w((C, C), "attn.Wo"),
            "ln1.g": tc.ones(C, "ln1.g"), "ln1.b": tc.zeros(C, "ln1.b"),
            "ffn.W1": w((C, 4 * C), "ffn.W1"), "ffn.b1": tc.zeros(4 * C, "ffn.b1"),
            "ffn.W2": w((4 * C, C), "ffn.W2"), "ffn.b2": tc.zeros(C, "ffn.b2"),
            "ln2.g": tc.ones(C, "ln2.g"), "ln2.b": tc.zeros(C, "ln2.b"),
        })
    else:
        D = cfg.embed_dim
        p.update({
            "fuse.W1": w((D, D), "fuse.W1"), "fuse.b1": tc.zeros(D, "fuse.b1"),
            "fuse.W2": w((D, D), "fuse.W2"), "fuse.b2": tc.zeros(D, "fuse.b2"),
        })
    return p


class Encoder:
    """Parameters plus the fixed graph structure they act on."""

    def __init__(self, cfg: EncoderConfig, adj: NormalizedAdjacency, params: dict[str, Tensor] | None = None,
                 seed=0):
        self.cfg = cfg
        self.adj = adj
        self.pattern = adj.pattern
        self.params = params if params is not None else init_params(cfg, adj, seed)
        for key in ("wgcn1.e", "wgcn2.e"):
            if self.params[key].shape != (self.pattern.nnz,):
                raise StateError(f"{key} does not align with the adjacency pattern")

    @classmethod
    def for_graph(cls, g: Graph, cfg: EncoderConfig, seed=0) -> "Encoder":
        return cls(cfg, g.normalized_adjacency(), seed=seed)

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def copy(self) -> "Encoder":
        params = {k: Tensor(v.data.copy(), requires_grad=v.requires_grad, name=v.name)
                  for k, v in self.params.items()}
        return Encoder(copy.copy(self.cfg), self.adj, params)

    def tokens(self, f, training: bool = False, rng=None) -> Tensor:
        """The (N, 4, C) stack [linear, mlp, 1-hop WGCN, 2-hop WGCN]."""
        f = tc.as_tensor(f)
        if f.ndim != 2 or f.shape[1] != self.cfg.input_dim:
            raise DimensionError(f"expected features (N, {self.cfg.input_dim}), got {f.shape}")
        if f.shape[0] != self.pattern.n:
            raise DimensionError(f"expected {self.pattern.n} nodes, got {f.shape[0]}")
        p, pat = self.params, self.pattern
        lin = project_linear(p, f)
        mlp = project_mlp(p, f)
        h1 = wgcn_layer(pat, p["wgcn1.e"], f, p["wgcn1.W"])
        h2 = wgcn_layer(pat, p["wgcn2.e"], wgcn_layer(pat, p["wgcn2.e"], f, p["wgcn2.W1"]), p["wgcn2.W2"])
        drop = self.cfg.dropout_filters
        outs = [tc.dropout(t, drop, rng, training) for t in (lin, mlp, h1, h2)]
        return tc.stack(outs, axis=1)

    def __call__(self, f, training: bool = False, rng=None) -> Tensor:
        """(N, 4C) embeddings for raw or masked feature matrix ``f``."""
        stack = self.tokens(f, training, rng)
        n = stack.shape[0]
        if self.cfg.attention:
            fused = fuse_tokens(self.params, stack, self.cfg.heads, self.cfg.dropout_attention, rng, training)
            return tc.reshape(fused, (n, self.cfg.embed_dim))
        flat = tc.reshape(stack, (n, self.cfg.embed_dim))
        return project_mlp(self.params, flat, "fuse")

    def embed(self, features: np.ndarray) -> np.ndarray:
        """Evaluation-mode embeddings as a plain array."""
        with tc.no_grad():
            return self(features, training=False).data.copy()


def encode(encoder: Encoder, features, training: bool = False, rng=None) -> Tensor:
    return encoder(features, training, rng)


def save_params(path, params: dict[str, Tensor], extra: dict | None = None, arrays: dict | None = None) -> None:
    """Write an ``.npz`` archive with a JSON manifest of tensor names and shapes."""
    manifest = {
        "format": "h3gnn-params",
        "version": CHECKPOINT_VERSION,
        "tensors": {k: list(v.shape) for k, v in params.items()},
        "extra": extra or {},
    }
    payload = {f"param/{k}": v.data for k, v in params.items()}
    for k, v in (arrays or {}).items():
        payload[f"array/{k}"] = np.asarray(v)
    np.savez(Path(path), __manifest__=np.array(json.dumps(manifest)), **payload)


def load_params(path) -> tuple[dict[str, Tensor], dict, dict[str, np.ndarray]]:
    with np.load(Path(path)) as z:
        manifest = json.loads(str(z["__manifest__"]))
        if manifest.get("format") != "h3gnn-params":
            raise StateError(f"{path} is not an h3gnn parameter archive")
        if manifest["version"] > CHECKPOINT_VERSION:
            raise StateError(f"checkpoint version {manifest['version']} is newer than supported")
        params = {}
        for name, shape in manifest["tensors"].items():
            arr = z[f"param/{name}"]
            if list(arr.shape) != shape:
                raise StateError(f"tensor {name} has shape {arr.shape}, manifest says {shape}")
            params[name] = Tensor(arr.copy(), requires_grad=True, name=name)
        arrays = {k[len("array/"):]: z[k].copy() for k in z.files if k.startswith("array/")}
    return params, manifest["extra"], arrays


def config_dict(cfg: EncoderConfig) -> dict:
    return asdict(cfg)
