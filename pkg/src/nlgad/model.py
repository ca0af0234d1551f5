"""Two-branch contrastive architecture and anomaly degree estimation.

The subgraph-node (SN) branch scores a target node's embedding against its
subgraph's pooled embedding; the node-node (NN) branch scores the target's
neighbor-aggregated embedding against its own raw-feature embedding. Each
node also gets a negative score against the next batch member's subgraph.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, DataError
from .graph import AttributedGraph
from .sampler import SamplerConfig, SubgraphSample, normalized_adjacency, sample_subgraph

_CKPT_MAGIC = b"NLGC"
_CKPT_VERSION = 1


class ModelParams:
    """All trainable weights of the two contrast branches.

    The SN branch shares one weight stack between its GCN and its MLP; the
    NN branch keeps separate GCN and MLP stacks. Layer 0 maps d -> d',
    further layers d' -> d'.
    """

    def __init__(self, sn_weights, sn_bilinear, nn_gcn_weights, nn_mlp_weights,
                 nn_bilinear):
        self.sn_weights = list(sn_weights)
        self.sn_bilinear = sn_bilinear
        self.nn_gcn_weights = list(nn_gcn_weights)
        self.nn_mlp_weights = list(nn_mlp_weights)
        self.nn_bilinear = nn_bilinear

    def all_tensors(self) -> list[Tensor]:
        return (self.sn_weights + [self.sn_bilinear]
                + self.nn_gcn_weights + self.nn_mlp_weights + [self.nn_bilinear])

    def named_tensors(self):
        for i, w in enumerate(self.sn_weights):
            yield f"sn_weight_{i}", w
        yield "sn_bilinear", self.sn_bilinear
        for i, w in enumerate(self.nn_gcn_weights):
            yield f"nn_gcn_weight_{i}", w
        for i, w in enumerate(self.nn_mlp_weights):
            yield f"nn_mlp_weight_{i}", w
        yield "nn_bilinear", self.nn_bilinear

    @property
    def hidden_dim(self) -> int:
        return self.sn_weights[-1].shape[1]

    @property
    def input_dim(self) -> int:
        return self.sn_weights[0].shape[0]


def init_params(input_dim: int, hidden_dim: int = 64, gcn_layers: int = 1,
                rng: np.random.Generator | None = None) -> ModelParams:
    """Fan-in-scaled uniform initialization, seeded via rng."""
    if gcn_layers < 1:
        raise ConfigError("gcn_layers must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)

    def uniform(rows, cols):
        bound = 1.0 / np.sqrt(rows)
        return Tensor(rng.uniform(-bound, bound, size=(rows, cols)), requires_grad=True)

    def stack():
        dims = [input_dim] + [hidden_dim] * gcn_layers
        return [uniform(dims[i], dims[i + 1]) for i in range(gcn_layers)]

    return ModelParams(
        sn_weights=stack(),
        sn_bilinear=uniform(hidden_dim, hidden_dim),
        nn_gcn_weights=stack(),
        nn_mlp_weights=stack(),
        nn_bilinear=uniform(hidden_dim, hidden_dim),
    )


# ---------------------------------------------------------------------------
# single-sample forwards (reference path; the batched path must agree)

def _gcn(weights, norm_adj: Tensor, h: Tensor) -> Tensor:
    for w in weights:
        h = ad.relu(ad.matmul(norm_adj, ad.matmul(h, w)))
    return h


def _mlp(weights, h: Tensor) -> Tensor:
    for w in weights:
        h = ad.relu(ad.matmul(h, w))
    return h


def sn_forward(params: ModelParams, sample: SubgraphSample, target_features):
    """SN branch on one sample: (pooled subgraph z, node embedding e, score s)."""
    na = Tensor(normalized_adjacency(sample))
    h = _gcn(params.sn_weights, na, Tensor(sample.features_masked))
    z = ad.row_mean(h)
    e = _mlp(params.sn_weights, Tensor(target_features))
    s = ad.bilinear(z, params.sn_bilinear, e)
    return z, e, s


def nn_forward(params: ModelParams, sample: SubgraphSample, target_features):
    """NN branch on one sample: (target-row embedding u, node embedding e, score s).

    u is the target position's row of the GCN output; the target's own
    features are masked, so u aggregates neighbors only.
    """
    na = Tensor(normalized_adjacency(sample))
    h = _gcn(params.nn_gcn_weights, na, Tensor(sample.features_masked))
    u = ad.take_rows(h, [0])
    e = _mlp(params.nn_mlp_weights, Tensor(target_features))
    s = ad.bilinear(u, params.nn_bilinear, e)
    return u, e, s


# ---------------------------------------------------------------------------
# batched training path

@dataclass(frozen=True)
class PairScores:
    """The four contrast scores of one node, each in (0, 1)."""

    s_p_sn: float
    s_n_sn: float
    s_p_nn: float
    s_n_nn: float


class ContrastBatch:
    """Positive samples for a batch of target nodes, negatives by cyclic shift.

    Node i's negative subgraph is node (i+1) mod B's positive subgraph, so a
    batch needs at least two members.
    """

    def __init__(self, node_ids, samples):
        node_ids = np.asarray(node_ids, dtype=np.int64)
        if len(node_ids) < 2:
            raise ConfigError("a contrast batch needs at least 2 nodes")
        if len(samples) != len(node_ids):
            raise DataError("one sample per batch node required")
        self.node_ids = node_ids
        self.samples = list(samples)
        c = self.samples[0].raw_adjacency.shape[0]
        self.norm_adjs = np.stack([normalized_adjacency(s) for s in self.samples])
        self.masked = np.vstack([s.features_masked for s in self.samples])
        self.targets = np.vstack([s.features_unmasked_target for s in self.samples])
        self.subgraph_size = c

    @classmethod
    def sample(cls, graph: AttributedGraph, node_ids, cfg: SamplerConfig,
               rng: np.random.Generator) -> "ContrastBatch":
        samples = [sample_subgraph(graph, int(v), cfg, rng) for v in node_ids]
        return cls(node_ids, samples)

    def __len__(self):
        return len(self.node_ids)


class BatchScores:
    """Per-branch positive/negative score tensors of shape (B, 1)."""

    def __init__(self, s_p_sn, s_n_sn, s_p_nn, s_n_nn):
        self.s_p_sn = s_p_sn
        self.s_n_sn = s_n_sn
        self.s_p_nn = s_p_nn
        self.s_n_nn = s_n_nn

    def __getitem__(self, i: int) -> PairScores:
        return PairScores(float(self.s_p_sn.values[i, 0]),
                          float(self.s_n_sn.values[i, 0]),
                          float(self.s_p_nn.values[i, 0]),
                          float(self.s_n_nn.values[i, 0]))

    def __len__(self):
        return self.s_p_sn.shape[0]


def forward_batch(params: ModelParams, batch: ContrastBatch) -> BatchScores:
    """Run both branches over a batch; differentiable when a tape is active."""
    nb, c = len(batch), batch.subgraph_size
    masked = Tensor(batch.masked)
    targets = Tensor(batch.targets)
    roll = (np.arange(nb) + 1) % nb

    def gcn(weights):
        h = masked
        for w in weights:
            h = ad.relu(ad.block_mix(batch.norm_adjs, ad.matmul(h, w)))
        return h

    # SN branch: pooled subgraph vs MLP of raw target features (shared weights).
    z = ad.block_mean(gcn(params.sn_weights), c)
    e = _mlp(params.sn_weights, targets)
    s_p_sn = ad.bilinear(z, params.sn_bilinear, e)
    s_n_sn = ad.bilinear(ad.take_rows(z, roll), params.sn_bilinear, e)

    # NN branch: target-row embedding vs MLP of raw target features.
    u = ad.take_rows(gcn(params.nn_gcn_weights), np.arange(nb) * c)
    e_hat = _mlp(params.nn_mlp_weights, targets)
    s_p_nn = ad.bilinear(u, params.nn_bilinear, e_hat)
    s_n_nn = ad.bilinear(ad.take_rows(u, roll), params.nn_bilinear, e_hat)

    return BatchScores(s_p_sn, s_n_sn, s_p_nn, s_n_nn)


def batch_loss(scores: BatchScores, alpha: float) -> Tensor:
    """Weighted sum of the two branches' summed BCE losses.

    Positives carry label 1, negatives label 0; the SN branch is weighted by
    alpha, the NN branch by 1 - alpha.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")
    nb = len(scores)
    ones, zeros = np.ones((nb, 1)), np.zeros((nb, 1))
    loss_sn = ad.add(ad.bce_loss(scores.s_p_sn, ones), ad.bce_loss(scores.s_n_sn, zeros))
    loss_nn = ad.add(ad.bce_loss(scores.s_p_nn, ones), ad.bce_loss(scores.s_n_nn, zeros))
    return ad.add(ad.scale(loss_sn, alpha), ad.scale(loss_nn, 1.0 - alpha))


def estimate_anomaly(scores: PairScores, alpha: float) -> float:
    """Per-node anomaly degree: weighted negative-minus-positive score gaps."""
    e_sn = scores.s_n_sn - scores.s_p_sn
    e_nn = scores.s_n_nn - scores.s_p_nn
    return alpha * e_sn + (1.0 - alpha) * e_nn


def estimate_anomaly_batch(scores: BatchScores, alpha: float) -> np.ndarray:
    e_sn = scores.s_n_sn.values - scores.s_p_sn.values
    e_nn = scores.s_n_nn.values - scores.s_p_nn.values
    return (alpha * e_sn + (1.0 - alpha) * e_nn).ravel()


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(params: ModelParams, path, config_hash: str):
    """Versioned binary checkpoint (layout in docs/formats.md)."""
    entries = list(params.named_tensors())
    with open(path, "wb") as f:
        f.write(_CKPT_MAGIC)
        f.write(struct.pack("<I", _CKPT_VERSION))
        h = config_hash.encode("utf-8")
        f.write(struct.pack("<H", len(h)))
        f.write(h)
        f.write(struct.pack("<I", len(entries)))
        for name, t in entries:
            nb = name.encode("utf-8")
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<QQ", *t.shape))
            f.write(t.values.astype("<f8").tobytes())


def load_checkpoint(path) -> tuple[ModelParams, str]:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}")
    if data[:4] != _CKPT_MAGIC:
        raise DataError(f"{path}: not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != _CKPT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    try:
        off = 8
        (hlen,) = struct.unpack_from("<H", data, off)
        off += 2
        config_hash = data[off:off + hlen].decode("utf-8")
        off += hlen
        (count,) = struct.unpack_from("<I", data, off)
        off += 4
        matrices = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", data, off)
            off += 2
            name = data[off:off + nlen].decode("utf-8")
            off += nlen
            rows, cols = struct.unpack_from("<QQ", data, off)
            off += 16
            vals = np.frombuffer(data, dtype="<f8", count=rows * cols,
                                 offset=off).copy().reshape(rows, cols)
            off += rows * cols * 8
            matrices[name] = Tensor(vals, requires_grad=True)
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: truncated or corrupt checkpoint ({exc})")

    def stack(prefix):
        keys = sorted(k for k in matrices if k.startswith(prefix))
        if not keys:
            raise DataError(f"{path}: checkpoint missing {prefix}* matrices")
        return [matrices[k] for k in keys]

    try:
        params = ModelParams(stack("sn_weight_"), matrices["sn_bilinear"],
                             stack("nn_gcn_weight_"), stack("nn_mlp_weight_"),
                             matrices["nn_bilinear"])
    except KeyError as exc:
        raise DataError(f"{path}: checkpoint missing matrix {exc}")
    return params, config_hash
