"""Code transformation graph: the merged before/after relational graphs.

Nodes of the two versions are matched deterministically; the merged graph
annotates every node and edge as unchanged, added, or deleted. Trimming
then keeps only the parts relevant to the change: enclosing statements of
changed nodes, everything dependency-connected to them, and the structural
descendants of what remains.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .graphs import DefUseConfig, Relation, RelationalCodeGraph, build_rcg
from .minic import AstNode, node_text, parse_source

ALPHAS = ("unchanged", "added", "deleted")


class MatchingInvalid(Exception):
    """Raised when a matching references node ids absent from the graphs."""


@dataclass
class NodeMatching:
    pairs: dict[int, int]  # old node id -> new node id
    unmatched_old: set[int]
    unmatched_new: set[int]


@dataclass
class CtgNode:
    id: int
    kind: str
    label: str
    line_old: int | None
    line_new: int | None
    is_statement: bool
    is_predicate: bool
    alpha: str


@dataclass(frozen=True)
class CtgEdge:
    src: int
    dst: int
    relation: Relation
    alpha: str


@dataclass
class CodeTransformationGraph:
    nodes: list[CtgNode]
    edges: list[CtgEdge]
    # node id -> (old node id or None, new node id or None)
    provenance: dict[int, tuple[int | None, int | None]] = field(default_factory=dict)

    def node_by_id(self, node_id: int) -> CtgNode:
        for node in self.nodes:
            if node.id == node_id:
                return node
        raise KeyError(node_id)


def _lcs_pairs(xs: list[str], ys: list[str]) -> list[tuple[int, int]]:
    """Index pairs of one longest common subsequence, deterministic."""
    n, m = len(xs), len(ys)
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            if xs[i] == ys[j]:
                dp[i][j] = dp[i + 1][j + 1] + 1
            else:
                dp[i][j] = max(dp[i + 1][j], dp[i][j + 1])
    pairs: list[tuple[int, int]] = []
    i = j = 0
    while i < n and j < m:
        if xs[i] == ys[j] and dp[i][j] == dp[i + 1][j + 1] + 1:
            pairs.append((i, j))
            i += 1
            j += 1
        elif dp[i + 1][j] >= dp[i][j + 1]:
            i += 1
        else:
            j += 1
    return pairs


def _func_name(node: AstNode) -> str:
    return node.label.rsplit(" ", 1)[-1]


class _Matcher:
    def __init__(self) -> None:
        self.pairs: dict[int, int] = {}

    def match(self, a: AstNode, b: AstNode) -> None:
        """Record the pair and align children; a.kind == b.kind holds."""
        self.pairs[a.id] = b.id
        if a.kind in ("translation-unit", "block"):
            self._match_sequence(a, b, top_level=a.kind == "translation-unit")
        else:
            self._match_children_greedy(a, b)

    def _match_sequence(self, a: AstNode, b: AstNode, top_level: bool) -> None:
        a_open = list(range(len(a.children)))
        b_open = list(range(len(b.children)))

        if top_level:
            # Functions pair by name regardless of body edits.
            by_name: dict[str, list[int]] = defaultdict(list)
            for j in b_open:
                if b.children[j].kind == "function-def":
                    by_name[_func_name(b.children[j])].append(j)
            taken: set[int] = set()
            for i in list(a_open):
                ai = a.children[i]
                if ai.kind != "function-def":
                    continue
                for j in by_name.get(_func_name(ai), []):
                    if j not in taken:
                        taken.add(j)
                        self.match(ai, b.children[j])
                        a_open.remove(i)
                        b_open.remove(j)
                        break

        a_texts = [node_text(a.children[i]) for i in a_open]
        b_texts = [node_text(b.children[j]) for j in b_open]
        lcs = _lcs_pairs(a_texts, b_texts)
        for ti, tj in lcs:
            self.match(a.children[a_open[ti]], b.children[b_open[tj]])
        lcs_a = {a_open[ti] for ti, _ in lcs}
        lcs_b = {b_open[tj] for _, tj in lcs}

        # Secondary pass: same-kind items at equal positions still pair,
        # so edits inside one statement do not discard its whole subtree.
        for i in a_open:
            if i in lcs_a or i >= len(b.children):
                continue
            if i in b_open and i not in lcs_b:
                bi = b.children[i]
                if bi.kind == a.children[i].kind:
                    self.match(a.children[i], bi)

    def _match_children_greedy(self, a: AstNode, b: AstNode) -> None:
        used = [False] * len(b.children)
        for ac in a.children:
            for j, bc in enumerate(b.children):
                if not used[j] and bc.kind == ac.kind and bc.label == ac.label:
                    used[j] = True
                    self.match(ac, bc)
                    break


def match_versions(g_old: RelationalCodeGraph,
                   g_new: RelationalCodeGraph) -> NodeMatching:
    """Deterministically pair nodes of the old and new versions."""
    if g_old.ast is None or g_new.ast is None:
        raise ValueError("matching needs graphs built from ASTs")
    matcher = _Matcher()
    matcher.match(g_old.ast.root, g_new.ast.root)
    pairs = matcher.pairs
    matched_new = set(pairs.values())
    unmatched_old = {n.id for n in g_old.nodes} - pairs.keys()
    unmatched_new = {n.id for n in g_new.nodes} - matched_new
    return NodeMatching(pairs, unmatched_old, unmatched_new)


def build_ctg(g_old: RelationalCodeGraph, g_new: RelationalCodeGraph,
              m: NodeMatching) -> CodeTransformationGraph:
    """Merge the two versions into one graph with change annotations."""
    old_ids = {n.id for n in g_old.nodes}
    new_ids = {n.id for n in g_new.nodes}
    if not (set(m.pairs) <= old_ids and set(m.pairs.values()) <= new_ids
            and m.unmatched_old <= old_ids and m.unmatched_new <= new_ids):
        raise MatchingInvalid("matching references unknown node ids")
    if len(set(m.pairs.values())) != len(m.pairs):
        raise MatchingInvalid("matching is not injective")

    new_by_id = {n.id: n for n in g_new.nodes}
    nodes: list[CtgNode] = []
    provenance: dict[int, tuple[int | None, int | None]] = {}
    old_to_ctg: dict[int, int] = {}
    new_to_ctg: dict[int, int] = {}

    for n in g_old.nodes:
        cid = len(nodes)
        old_to_ctg[n.id] = cid
        if n.id in m.pairs:
            partner = new_by_id[m.pairs[n.id]]
            new_to_ctg[partner.id] = cid
            nodes.append(CtgNode(cid, n.kind, partner.label, n.line, partner.line,
                                 n.is_statement or partner.is_statement,
                                 n.is_predicate or partner.is_predicate,
                                 "unchanged"))
            provenance[cid] = (n.id, partner.id)
        else:
            nodes.append(CtgNode(cid, n.kind, n.label, n.line, None,
                                 n.is_statement, n.is_predicate, "deleted"))
            provenance[cid] = (n.id, None)
    for n in g_new.nodes:
        if n.id in new_to_ctg:
            continue
        cid = len(nodes)
        new_to_ctg[n.id] = cid
        nodes.append(CtgNode(cid, n.kind, n.label, None, n.line,
                             n.is_statement, n.is_predicate, "added"))
        provenance[cid] = (None, n.id)

    new_edge_set = {(e.src, e.dst, e.relation) for e in g_new.edges}
    old_edge_set = {(e.src, e.dst, e.relation) for e in g_old.edges}
    rpairs = {v: k for k, v in m.pairs.items()}

    edges: list[CtgEdge] = []
    for e in g_old.edges:
        src_new = m.pairs.get(e.src)
        dst_new = m.pairs.get(e.dst)
        if (src_new is not None and dst_new is not None
                and (src_new, dst_new, e.relation) in new_edge_set):
            alpha = "unchanged"
        else:
            alpha = "deleted"
        edges.append(CtgEdge(old_to_ctg[e.src], old_to_ctg[e.dst], e.relation, alpha))
    for e in g_new.edges:
        src_old = rpairs.get(e.src)
        dst_old = rpairs.get(e.dst)
        if (src_old is not None and dst_old is not None
                and (src_old, dst_old, e.relation) in old_edge_set):
            continue  # already emitted as unchanged
        edges.append(CtgEdge(new_to_ctg[e.src], new_to_ctg[e.dst], e.relation, "added"))

    return CodeTransformationGraph(nodes, edges, provenance)


def trim_ctg(g: CodeTransformationGraph,
             hop_limit: int | None = None) -> CodeTransformationGraph:
    """Keep only the change-relevant subgraph.

    Relevance: the changed nodes themselves; statement/predicate ancestors
    of changed nodes; the dependency closure (optionally capped at
    hop_limit hops) of relevant nodes; structural descendants of relevant
    nodes. Structure ancestors of every kept node are retained as well so
    the kept structure edges still form trees. Node ids are preserved.
    """
    by_id = {n.id: n for n in g.nodes}
    changed = {n.id for n in g.nodes if n.alpha != "unchanged"}
    if not changed:
        return CodeTransformationGraph([], [], {})

    parents: dict[int, list[int]] = defaultdict(list)
    children: dict[int, list[int]] = defaultdict(list)
    dep_adj: dict[int, set[int]] = defaultdict(set)
    for e in g.edges:
        if e.relation.cls == "structure":
            parents[e.dst].append(e.src)
            children[e.src].append(e.dst)
        else:
            dep_adj[e.src].add(e.dst)
            dep_adj[e.dst].add(e.src)

    def up_closure(seeds: set[int]) -> set[int]:
        seen: set[int] = set()
        stack = list(seeds)
        while stack:
            for p in parents[stack.pop()]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    relevant = set(changed)
    for anc in up_closure(changed):
        node = by_id[anc]
        if node.is_statement or node.is_predicate:
            relevant.add(anc)

    # dependency closure, breadth-first so hop_limit counts hops
    frontier = set(relevant)
    hops = 0
    while frontier and (hop_limit is None or hops < hop_limit):
        reached: set[int] = set()
        for nid in frontier:
            for nb in dep_adj[nid]:
                if nb not in relevant:
                    reached.add(nb)
        relevant |= reached
        frontier = reached
        hops += 1

    # structural descendants of everything relevant so far
    stack = list(relevant)
    while stack:
        for c in children[stack.pop()]:
            if c not in relevant:
                relevant.add(c)
                stack.append(c)

    keep = relevant | up_closure(relevant)
    nodes = [n for n in g.nodes if n.id in keep]
    edges = [e for e in g.edges if e.src in keep and e.dst in keep]
    provenance = {nid: prov for nid, prov in g.provenance.items() if nid in keep}
    return CodeTransformationGraph(nodes, edges, provenance)


def change_rate(g: CodeTransformationGraph) -> float:
    """Fraction of nodes whose annotation is not "unchanged"; 0 if empty."""
    if not g.nodes:
        return 0.0
    changed = sum(1 for n in g.nodes if n.alpha != "unchanged")
    return changed / len(g.nodes)


def ctg_from_sources(before: str, after: str,
                     defuse: DefUseConfig | None = None,
                     trim: bool = True,
                     hop_limit: int | None = None) -> CodeTransformationGraph:
    """Parse, graph, match, and merge one before/after file pair."""
    g_old = build_rcg(parse_source(before, "before"), defuse)
    g_new = build_rcg(parse_source(after, "after"), defuse)
    ctg = build_ctg(g_old, g_new, match_versions(g_old, g_new))
    return trim_ctg(ctg, hop_limit) if trim else ctg


def union_ctgs(parts: list[CodeTransformationGraph]) -> CodeTransformationGraph:
    """Disjoint union of per-file graphs; one commit = one graph."""
    nodes: list[CtgNode] = []
    edges: list[CtgEdge] = []
    provenance: dict[int, tuple[int | None, int | None]] = {}
    offset = 0
    for part in parts:
        remap = {n.id: n.id + offset for n in part.nodes}
        for n in part.nodes:
            nodes.append(CtgNode(remap[n.id], n.kind, n.label, n.line_old,
                                 n.line_new, n.is_statement, n.is_predicate,
                                 n.alpha))
            provenance[remap[n.id]] = part.provenance.get(n.id, (None, None))
        for e in part.edges:
            edges.append(CtgEdge(remap[e.src], remap[e.dst], e.relation, e.alpha))
        offset += max((n.id for n in part.nodes), default=-1) + 1
    return CodeTransformationGraph(nodes, edges, provenance)


def ctg_to_json(g: CodeTransformationGraph) -> dict:
    return {
        "nodes": [
            {"id": n.id, "kind": n.kind, "label": n.label,
             "line_old": n.line_old, "line_new": n.line_new,
             "is_statement": n.is_statement, "is_predicate": n.is_predicate,
             "alpha": n.alpha}
            for n in g.nodes
        ],
        "edges": [
            {"src": e.src, "dst": e.dst, "class": e.relation.cls,
             "subtype": e.relation.subtype, "alpha": e.alpha}
            for e in g.edges
        ],
    }


_DOT_STYLE = {"tree": "solid", "data": "dashed", "control": "dotted"}
_DOT_COLOR = {"unchanged": "gray", "added": "green", "deleted": "red"}


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def ctg_to_dot(g: CodeTransformationGraph, name: str = "ctg") -> str:
    lines = [f"digraph {name} {{"]
    for n in g.nodes:
        label = _dot_escape(f"{n.id}:{n.kind}" + (f":{n.label}" if n.label else ""))
        color = _DOT_COLOR[n.alpha]
        lines.append(f'  n{n.id} [label="{label}", color={color}];')
    for e in g.edges:
        style = _DOT_STYLE[e.relation.subtype]
        color = _DOT_COLOR[e.alpha]
        lines.append(f'  n{e.src} -> n{e.dst} [style={style}, color={color}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
