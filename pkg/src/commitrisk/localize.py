"""Explanation-based statement localization.

Edge importances come from the model (final-layer attention, or occlusion:
the prediction drop when an edge is removed).  Node importance is the max
over edge classes of the importance mass on a node's incident edges, and a
statement's suspiciousness sums node importance over its structural
descendants (including itself).
"""
from __future__ import annotations

from dataclasses import dataclass

from commitrisk.ctg import CodeTransformationGraph
from commitrisk.neural.model import CommitRiskModel, model_forward

EDGE_CLASSES = ("structure", "dependency")


class NotAttentionModel(TypeError):
    pass


# edge key: (src, dst, relation); values normalized to [0, 1] with max 1
EdgeImportance = dict


def attention_edge_importance(model: CommitRiskModel, g: CodeTransformationGraph,
                              average_layers: bool = False) -> EdgeImportance:
    """Importance of each edge = its attention weight (final layer by
    default, mean over layers with average_layers), normalized by the max."""
    if model.config.layer_kind != "rgat":
        raise NotAttentionModel("attention explanation needs an attention model")
    if not g.nodes:
        return {}
    from commitrisk.neural.model import _forward_batch, _make_batch
    batch = _make_batch([g], model.vocab, model.config.direction)
    _, _, layers = _forward_batch(model, batch, canonical=True,
                                  want_attention=True)
    if average_layers:
        merged = {}
        for att in layers:
            for key, val in att.items():
                merged[key] = merged.get(key, 0.0) + val / len(layers)
    else:
        merged = layers[-1]
    row_of = {n.id: i for i, n in enumerate(g.nodes)}
    raw = {}
    for e in g.edges:
        key = (row_of[e.dst], row_of[e.src], e.relation.cls)
        raw[(e.src, e.dst, e.relation)] = merged.get(key, 0.0)
    return _normalize(raw)


def occlusion_edge_importance(model: CommitRiskModel,
                              g: CodeTransformationGraph) -> EdgeImportance:
    """Importance of edge e = max(0, p(g) - p(g without e)), normalized."""
    if not g.edges:
        return {}
    base = model_forward(model, g).probability
    raw = {}
    for i, e in enumerate(g.edges):
        rest = g.edges[:i] + g.edges[i + 1:]
        reduced = CodeTransformationGraph(g.nodes, rest, g.provenance)
        drop = base - model_forward(model, reduced).probability
        raw[(e.src, e.dst, e.relation)] = max(0.0, drop)
    return _normalize(raw)


def _normalize(raw: dict) -> EdgeImportance:
    top = max(raw.values(), default=0.0)
    if top <= 0.0:
        return {key: 0.0 for key in raw}
    return {key: val / top for key, val in raw.items()}


def node_importance(im_e: EdgeImportance, g: CodeTransformationGraph) -> dict:
    """Per node: max over edge classes of the summed importance of all
    incident edges (incoming and outgoing) of that class."""
    sums = {n.id: {cls: 0.0 for cls in EDGE_CLASSES} for n in g.nodes}
    for (src, dst, relation), score in im_e.items():
        sums[src][relation.cls] += score
        sums[dst][relation.cls] += score
    return {nid: max(per_cls.values(), default=0.0)
            for nid, per_cls in sums.items()}


@dataclass(frozen=True)
class RankedStatement:
    node_id: int
    line_old: int | None
    line_new: int | None
    alpha: str
    score: float


@dataclass
class StatementRanking:
    entries: list[RankedStatement]

    def top(self, k: int) -> list[RankedStatement]:
        return self.entries[:k]


def statement_suspiciousness(im_n: dict, g: CodeTransformationGraph) -> StatementRanking:
    """Score each statement by the summed node importance of its structural
    descendants (itself included); rank descending, ties by node id."""
    children: dict[int, list[int]] = {n.id: [] for n in g.nodes}
    for e in g.edges:
        if e.relation.cls == "structure":
            children[e.src].append(e.dst)
    entries = []
    for node in g.nodes:
        if not node.is_statement:
            continue
        total = 0.0
        stack = [node.id]
        seen = set()
        while stack:
            nid = stack.pop()
            if nid in seen:
                continue
            seen.add(nid)
            total += im_n.get(nid, 0.0)
            stack.extend(children[nid])
        entries.append(RankedStatement(node.id, node.line_old, node.line_new,
                                       node.alpha, total))
    entries.sort(key=lambda r: (-r.score, r.node_id))
    return StatementRanking(entries)


def explain_statements(model: CommitRiskModel, g: CodeTransformationGraph,
                       explainer: str = "occlusion") -> StatementRanking:
    if explainer == "occlusion":
        im_e = occlusion_edge_importance(model, g)
    elif explainer == "attention":
        im_e = attention_edge_importance(model, g)
    else:
        raise ValueError(f"unknown explainer {explainer!r}")
    return statement_suspiciousness(node_importance(im_e, g), g)


def ranking_to_json(ranking: StatementRanking) -> list:
    return [{"node_id": r.node_id, "line_old": r.line_old,
             "line_new": r.line_new, "alpha": r.alpha, "score": r.score}
            for r in ranking.entries]


def format_report(ranking: StatementRanking, before_src: str, after_src: str,
                  top_k: int = 5) -> str:
    """Readable top-k report mapping statements back to source lines."""
    before_lines = before_src.splitlines()
    after_lines = after_src.splitlines()
    out = ["suspicious statements (most suspicious first):"]
    for rank, r in enumerate(ranking.top(top_k), start=1):
        if r.line_new is not None and 0 < r.line_new <= len(after_lines):
            where, text = f"after:{r.line_new}", after_lines[r.line_new - 1]
        elif r.line_old is not None and 0 < r.line_old <= len(before_lines):
            where, text = f"before:{r.line_old}", before_lines[r.line_old - 1]
        else:
            where, text = "?", ""
        out.append(f"{rank:2d}. score={r.score:.4f} [{r.alpha}] "
                   f"{where}  {text.strip()}")
    return "\n".join(out) + "\n"
