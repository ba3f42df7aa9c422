"""Relational GNN commit classifier: RGCN/RGAT layers, readout, MLP head,
BCE training with Adam, finite-difference gradient checks, checkpoints.

Message passing runs over the two edge classes of a change graph (structure,
dependency).  Parallel edges of one class between the same pair of nodes
collapse to a single neighbor: neighborhoods are sets.
"""
from __future__ import annotations

import base64
import json
import math
import random
from dataclasses import asdict, dataclass

import numpy as np

from commitrisk.neural import autograd as ag
from commitrisk.neural.autograd import Tensor
from commitrisk.neural.embedding import (ALPHA_ORDER, EmbeddingTable, Vocab,
                                         alpha_onehot, node_token_ids)

RELATIONS = ("structure", "dependency")
BCE_EPS = 1e-12


class ShapeMismatch(ValueError):
    pass


class EmptyGraph(ValueError):
    pass


class NonFiniteLoss(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class HyperParams:
    layer_kind: str = "rgat"        # rgcn | rgat
    d_emb: int = 64
    d_hidden: int = 64
    num_layers: int = 3
    readout: str = "mean"           # sum | mean | max
    leaky_slope: float = 0.2
    direction: str = "in"           # in | bidirectional
    self_loop: bool = False
    threshold: float = 0.5
    freeze_embeddings: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.layer_kind not in ("rgcn", "rgat"):
            raise ValueError(f"unknown layer kind {self.layer_kind!r}")
        if self.readout not in ("sum", "mean", "max"):
            raise ValueError(f"unknown readout {self.readout!r}")
        if self.direction not in ("in", "bidirectional"):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.num_layers < 1:
            raise ValueError("need at least one layer")


@dataclass
class LayerParams:
    w: dict[str, Tensor]                    # relation -> d_in x d_out
    q: dict[str, Tensor] | None = None      # rgat: relation -> d_out x 1
    k: dict[str, Tensor] | None = None
    leaky_slope: float = 0.2


@dataclass(frozen=True)
class Prediction:
    probability: float
    label: str
    logit: float


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    lr: float = 1e-3
    batch: int = 16
    seed: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        if self.optimizer != "adam":
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


class CommitRiskModel:
    def __init__(self, config: HyperParams, vocab: Vocab,
                 embedding: Tensor, layers: list[LayerParams],
                 mlp: dict[str, Tensor]):
        self.config = config
        self.vocab = vocab
        self.embedding = embedding
        self.layers = layers
        self.mlp = mlp

    def parameters(self) -> list[tuple[str, Tensor]]:
        """Named parameters in a fixed order (init, Adam, checkpoints)."""
        out = [("embedding", self.embedding)]
        for i, layer in enumerate(self.layers):
            for rel in RELATIONS:
                out.append((f"layers.{i}.{rel}.w", layer.w[rel]))
                if layer.q is not None:
                    out.append((f"layers.{i}.{rel}.q", layer.q[rel]))
                    out.append((f"layers.{i}.{rel}.k", layer.k[rel]))
        for name in ("w1", "b1", "w2", "b2"):
            out.append((f"mlp.{name}", self.mlp[name]))
        return out

    def embedding_table(self) -> EmbeddingTable:
        return EmbeddingTable(self.vocab, self.embedding.data.copy())


def _uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(max(1, fan_in))
    return rng.uniform(-bound, bound, size=shape)


def new_model(vocab: Vocab, config: HyperParams = HyperParams(),
              embeddings: EmbeddingTable | None = None) -> CommitRiskModel:
    rng = np.random.default_rng(config.seed)
    if embeddings is None:
        emb = _uniform(rng, (vocab.size, config.d_emb), config.d_emb)
    else:
        if embeddings.weights.shape != (vocab.size, config.d_emb):
            raise ShapeMismatch("pretrained embedding shape does not match")
        emb = embeddings.weights.copy()
    trainable_emb = not config.freeze_embeddings
    embedding = Tensor(emb, requires_grad=trainable_emb)

    d_in = config.d_emb + len(ALPHA_ORDER)
    layers = []
    for _ in range(config.num_layers):
        w, q, k = {}, {}, {}
        for rel in RELATIONS:
            w[rel] = Tensor(_uniform(rng, (d_in, config.d_hidden), d_in),
                            requires_grad=True)
            if config.layer_kind == "rgat":
                q[rel] = Tensor(_uniform(rng, (config.d_hidden, 1), config.d_hidden),
                                requires_grad=True)
                k[rel] = Tensor(_uniform(rng, (config.d_hidden, 1), config.d_hidden),
                                requires_grad=True)
        layers.append(LayerParams(
            w=w,
            q=q if config.layer_kind == "rgat" else None,
            k=k if config.layer_kind == "rgat" else None,
            leaky_slope=config.leaky_slope))
        d_in = config.d_hidden
    mlp = {
        "w1": Tensor(_uniform(rng, (config.d_hidden, config.d_hidden),
                              config.d_hidden), requires_grad=True),
        "b1": Tensor(np.zeros(config.d_hidden), requires_grad=True),
        "w2": Tensor(_uniform(rng, (config.d_hidden, 1), config.d_hidden),
                     requires_grad=True),
        "b2": Tensor(np.zeros(1), requires_grad=True),
    }
    return CommitRiskModel(config, vocab, embedding, layers, mlp)


def _relation_pairs(g, direction: str = "in") -> dict[str, np.ndarray]:
    """Deduplicated (src, dst) row pairs per edge class, in node-row space."""
    row_of = {n.id: i for i, n in enumerate(g.nodes)}
    pairs: dict[str, set] = {rel: set() for rel in RELATIONS}
    for e in g.edges:
        pairs[e.relation.cls].add((row_of[e.src], row_of[e.dst]))
        if direction == "bidirectional":
            pairs[e.relation.cls].add((row_of[e.dst], row_of[e.src]))
    out = {}
    for rel in RELATIONS:
        if pairs[rel]:
            arr = np.array(sorted(pairs[rel], key=lambda p: (p[1], p[0])),
                           dtype=np.intp)
        else:
            arr = np.empty((0, 2), dtype=np.intp)
        out[rel] = arr
    return out


def _check_widths(layer: LayerParams, h_width: int):
    for rel in RELATIONS:
        w = layer.w[rel]
        if w.data.shape[0] != h_width:
            raise ShapeMismatch(
                f"layer expects width {w.data.shape[0]}, features have {h_width}")
        if layer.q is not None:
            if layer.q[rel].data.shape != (w.data.shape[1], 1) or \
               layer.k[rel].data.shape != (w.data.shape[1], 1):
                raise ShapeMismatch("attention kernels must be d_out x 1")


def _rgcn_layer(layer: LayerParams, pairs, h: Tensor, n: int,
                self_loop: bool, canonical: bool) -> Tensor:
    _check_widths(layer, h.data.shape[1])
    d_out = layer.w[RELATIONS[0]].data.shape[1]
    total = None
    for rel in RELATIONS:
        arr = pairs[rel]
        if len(arr) == 0:
            continue
        src, dst = arr[:, 0], arr[:, 1]
        hw = ag.matmul(h, layer.w[rel], canonical=canonical)
        counts = np.bincount(dst, minlength=n).astype(np.float64)
        coeff = Tensor((1.0 / np.maximum(counts, 1.0))[dst][:, None])
        msgs = ag.mul(ag.gather_rows(hw, src), coeff)
        agg = ag.segment_sum(msgs, dst, n)
        total = agg if total is None else ag.add(total, agg)
    if total is None:
        total = Tensor(np.zeros((n, d_out)))
    if self_loop:
        if h.data.shape[1] != d_out:
            raise ShapeMismatch("self-loop needs matching layer widths")
        total = ag.add(total, h)
    return ag.relu(total)


def _rgat_layer(layer: LayerParams, pairs, h: Tensor, n: int,
                self_loop: bool, canonical: bool):
    if layer.q is None or layer.k is None:
        raise ShapeMismatch("attention layer needs query and key kernels")
    _check_widths(layer, h.data.shape[1])
    d_out = layer.w[RELATIONS[0]].data.shape[1]
    total = None
    attention: dict[tuple[int, int, str], float] = {}
    for rel in RELATIONS:
        arr = pairs[rel]
        if len(arr) == 0:
            continue
        src, dst = arr[:, 0], arr[:, 1]
        hw = ag.matmul(h, layer.w[rel], canonical=canonical)
        q = ag.matmul(hw, layer.q[rel], canonical=canonical)
        k = ag.matmul(hw, layer.k[rel], canonical=canonical)
        logits = ag.leaky_relu(
            ag.add(ag.gather_rows(q, dst), ag.gather_rows(k, src)),
            slope=layer.leaky_slope)
        weights = ag.segment_softmax(logits, dst, n)
        msgs = ag.mul(weights, ag.gather_rows(hw, src))
        agg = ag.segment_sum(msgs, dst, n)
        total = agg if total is None else ag.add(total, agg)
        flat = weights.data.reshape(-1)
        for row in range(len(arr)):
            attention[(int(dst[row]), int(src[row]), rel)] = float(flat[row])
    if total is None:
        total = Tensor(np.zeros((n, d_out)))
    if self_loop:
        if h.data.shape[1] != d_out:
            raise ShapeMismatch("self-loop needs matching layer widths")
        total = ag.add(total, h)
    return ag.relu(total), attention


def rgcn_forward(layer: LayerParams, g, h, *, direction: str = "in",
                 self_loop: bool = False, canonical: bool = True):
    """One relational-convolution layer over graph g.

    h_i' = ReLU(sum over relations r, in-neighbors j of (1/c_ir) W_r h_j)
    with c_ir the in-neighbor count of i under r.
    """
    was_tensor = isinstance(h, Tensor)
    h = ag.as_tensor(h)
    pairs = _relation_pairs(g, direction)
    out = _rgcn_layer(layer, pairs, h, len(g.nodes), self_loop, canonical)
    return out if was_tensor else out.data


def rgat_forward(layer: LayerParams, g, h, *, direction: str = "in",
                 self_loop: bool = False, canonical: bool = True):
    """One relational-attention layer; also returns the attention map keyed
    by (node, in-neighbor, relation)."""
    was_tensor = isinstance(h, Tensor)
    h = ag.as_tensor(h)
    pairs = _relation_pairs(g, direction)
    out, att = _rgat_layer(layer, pairs, h, len(g.nodes), self_loop, canonical)
    return (out if was_tensor else out.data), att


def readout(h, mode: str):
    """Aggregate node features into one graph vector (sum/mean/max)."""
    was_tensor = isinstance(h, Tensor)
    h = ag.as_tensor(h)
    if h.data.shape[0] == 0:
        raise EmptyGraph("readout of an empty graph")
    seg = np.zeros(h.data.shape[0], dtype=np.intp)
    if mode == "sum":
        out = ag.segment_sum(h, seg, 1)
    elif mode == "mean":
        out = ag.segment_mean(h, seg, 1)
    elif mode == "max":
        out = ag.segment_max(h, seg, 1)
    else:
        raise ValueError(f"unknown readout {mode!r}")
    flat = Tensor(out.data[0], _parents=(out,),
                  _backward=lambda grad: (grad[None, :],))
    return flat if was_tensor else flat.data


@dataclass
class _Batch:
    """Disjoint union of graphs prepared for one forward pass."""
    token_ids: np.ndarray
    alphas: np.ndarray
    pairs: dict[str, np.ndarray]
    graph_of: np.ndarray
    num_nodes: int
    num_graphs: int
    node_rows: list[np.ndarray]


def _make_batch(graphs, vocab: Vocab, direction: str) -> _Batch:
    token_ids, alphas, graph_of, rows = [], [], [], []
    pairs = {rel: [] for rel in RELATIONS}
    offset = 0
    for gi, g in enumerate(graphs):
        if not g.nodes:
            raise EmptyGraph("empty change graph in forward pass")
        token_ids.append(node_token_ids(g.nodes, vocab))
        alphas.append(alpha_onehot(g.nodes))
        graph_of.append(np.full(len(g.nodes), gi, dtype=np.intp))
        rows.append(np.arange(offset, offset + len(g.nodes), dtype=np.intp))
        for rel, arr in _relation_pairs(g, direction).items():
            if len(arr):
                pairs[rel].append(arr + offset)
        offset += len(g.nodes)
    merged = {}
    for rel in RELATIONS:
        merged[rel] = (np.concatenate(pairs[rel])
                       if pairs[rel] else np.empty((0, 2), dtype=np.intp))
    return _Batch(np.concatenate(token_ids), np.concatenate(alphas),
                  merged, np.concatenate(graph_of), offset, len(graphs), rows)


def _forward_batch(model: CommitRiskModel, batch: _Batch, canonical: bool,
                   want_attention: bool = False):
    """Probabilities (B x 1 tensor) for a batch; optionally per-layer
    attention maps (node rows are batch-local)."""
    cfg = model.config
    h = ag.concat_cols(ag.gather_rows(model.embedding, batch.token_ids),
                       Tensor(batch.alphas))
    attention_layers = []
    for layer in model.layers:
        if cfg.layer_kind == "rgcn":
            h = _rgcn_layer(layer, batch.pairs, h, batch.num_nodes,
                            cfg.self_loop, canonical)
        else:
            h, att = _rgat_layer(layer, batch.pairs, h, batch.num_nodes,
                                 cfg.self_loop, canonical)
            if want_attention:
                attention_layers.append(att)
    if cfg.readout == "sum":
        pooled = ag.segment_sum(h, batch.graph_of, batch.num_graphs)
    elif cfg.readout == "mean":
        pooled = ag.segment_mean(h, batch.graph_of, batch.num_graphs)
    else:
        pooled = ag.segment_max(h, batch.graph_of, batch.num_graphs)
    hidden = ag.relu(ag.add(ag.matmul(pooled, model.mlp["w1"],
                                      canonical=canonical), model.mlp["b1"]))
    logits = ag.add(ag.matmul(hidden, model.mlp["w2"], canonical=canonical),
                    model.mlp["b2"])
    probs = ag.sigmoid(logits)
    return (probs, logits, attention_layers) if want_attention else (probs, logits)


def model_forward(model: CommitRiskModel, g) -> Prediction:
    """Classify one change graph.  Raises EmptyGraph on an empty graph;
    callers that accept identity commits map that case to a safe prediction
    with an empty-change flag."""
    if not g.nodes:
        raise EmptyGraph("change graph has no nodes")
    batch = _make_batch([g], model.vocab, model.config.direction)
    probs, logits = _forward_batch(model, batch, canonical=True)
    p = float(probs.data[0, 0])
    label = "dangerous" if p >= model.config.threshold else "safe"
    return Prediction(probability=p, label=label, logit=float(logits.data[0, 0]))


def loss_bce(p, y):
    """Binary cross-entropy on a probability; clamps p to [eps, 1-eps]."""
    if isinstance(p, Tensor):
        pc = ag.clamp(p, BCE_EPS, 1.0 - BCE_EPS)
        y_t = ag.as_tensor(y)
        one = Tensor(np.ones_like(pc.data))
        loss = ag.sub(Tensor(np.zeros_like(pc.data)),
                      ag.add(ag.mul(y_t, ag.log(pc)),
                             ag.mul(ag.sub(one, y_t), ag.log(ag.sub(one, pc)))))
        return loss
    pc = min(max(float(p), BCE_EPS), 1.0 - BCE_EPS)
    return -(y * math.log(pc) + (1 - y) * math.log(1 - pc))


class _Adam:
    def __init__(self, params: list[tuple[str, Tensor]], lr: float,
                 beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {name: np.zeros_like(t.data) for name, t in params}
        self.v = {name: np.zeros_like(t.data) for name, t in params}
        self.t = 0

    def step(self):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for name, p in self.params:
            if not p.requires_grad:
                continue
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m = self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            v = self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            p.data -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def train(model: CommitRiskModel, dataset, cfg: TrainConfig = TrainConfig()):
    """Train in place; returns (model, history of per-epoch loss/accuracy).

    Graphs are batched as disjoint unions.  Empty change graphs carry no
    signal (an identity commit) and are dropped up front.
    """
    usable = [(g, int(y)) for g, y in dataset if g.nodes]
    if not usable:
        raise ValueError("training set has no nonempty change graphs")
    rng = random.Random(cfg.seed)
    optimizer = _Adam(model.parameters(), cfg.lr)
    history = []
    order = list(range(len(usable)))
    for epoch in range(cfg.epochs):
        rng.shuffle(order)
        total_loss = 0.0
        correct = 0
        for start in range(0, len(order), cfg.batch):
            chosen = order[start:start + cfg.batch]
            graphs = [usable[i][0] for i in chosen]
            ys = np.array([[usable[i][1]] for i in chosen], dtype=np.float64)
            batch = _make_batch(graphs, model.vocab, model.config.direction)
            probs, _ = _forward_batch(model, batch, canonical=False)
            loss = ag.mean_all(loss_bce(probs, Tensor(ys)))
            value = loss.item()
            if not math.isfinite(value):
                raise NonFiniteLoss(
                    f"non-finite loss {value} at epoch {epoch}, "
                    f"batch starting {start}")
            total_loss += value * len(chosen)
            correct += int(np.sum(
                (probs.data >= model.config.threshold) == (ys >= 0.5)))
            for _, p in model.parameters():
                p.zero_grad()
            loss.backward()
            optimizer.step()
        history.append({
            "epoch": epoch,
            "loss": total_loss / len(order),
            "accuracy": correct / len(order),
        })
    return model, history


def grad_check(model: CommitRiskModel, g, y: int, step: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients
    of the BCE loss, over every parameter entry."""
    def loss_value() -> float:
        batch = _make_batch([g], model.vocab, model.config.direction)
        probs, _ = _forward_batch(model, batch, canonical=True)
        return float(loss_bce(probs, Tensor(np.array([[float(y)]]))).data[0, 0])

    params = model.parameters()
    for _, p in params:
        p.zero_grad()
    batch = _make_batch([g], model.vocab, model.config.direction)
    probs, _ = _forward_batch(model, batch, canonical=True)
    loss = ag.mean_all(loss_bce(probs, Tensor(np.array([[float(y)]]))))
    loss.backward()
    worst = 0.0
    for _, p in params:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        a_flat = analytic.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + step
            up = loss_value()
            flat[i] = keep - step
            down = loss_value()
            flat[i] = keep
            numeric = (up - down) / (2.0 * step)
            err = abs(a_flat[i] - numeric) / max(1.0, abs(a_flat[i]), abs(numeric))
            worst = max(worst, err)
    return worst


CHECKPOINT_FORMAT = "commitrisk-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(model: CommitRiskModel, path) -> None:
    tensors = {}
    for name, p in model.parameters():
        tensors[name] = {
            "dtype": "float64",
            "shape": list(p.data.shape),
            "data": base64.b64encode(np.ascontiguousarray(p.data).tobytes())
                    .decode("ascii"),
        }
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "vocab": model.vocab.tokens(),
        "tensors": tensors,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_checkpoint(path) -> CommitRiskModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"not a model checkpoint: {path}")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {doc.get('version')}")
    config = HyperParams(**doc["config"])
    vocab = Vocab({tok: i for i, tok in enumerate(doc["vocab"])})
    model = new_model(vocab, config)
    for name, p in model.parameters():
        spec = doc["tensors"].get(name)
        if spec is None:
            raise CheckpointError(f"checkpoint missing tensor {name}")
        raw = base64.b64decode(spec["data"])
        try:
            arr = np.frombuffer(raw, dtype=np.float64).reshape(spec["shape"]).copy()
        except ValueError as exc:
            raise CheckpointError(f"tensor {name} is corrupt: {exc}") from exc
        if arr.shape != p.data.shape:
            raise CheckpointError(f"tensor {name} has shape {arr.shape}, "
                                  f"expected {p.data.shape}")
        p.data = arr
    return model
