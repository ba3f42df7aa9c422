"""Independent oracles the property tests compare against.

These reimplement the analyses in deliberately naive ways: reaching
definitions by brute-force path enumeration (acyclic) and by bitset
iteration (loops), and trimming by repeated whole-edge-list scans.
"""
from __future__ import annotations

from commitrisk.ctg import CodeTransformationGraph
from commitrisk.graphs import DefUseConfig, _Cfg, _flow_def_uses
from commitrisk.minic import AstNode


def reaching_by_paths(func: AstNode,
                      config: DefUseConfig | None = None
                      ) -> dict[tuple[int, str], set[int]]:
    """All-paths def-use oracle; only valid for acyclic control flow."""
    config = config or DefUseConfig()
    cfg = _Cfg(func)
    def_use = {n.id: _flow_def_uses(n, config) for n in cfg.order}
    result: dict[tuple[int, str], set[int]] = {}
    for node in cfg.order:
        for var in def_use[node.id][0]:
            result[(node.id, var)] = set()
    if not cfg.order:
        return result

    entry = cfg.order[0].id
    stack: list[list[int]] = [[entry]]
    while stack:
        path = stack.pop()
        succs = cfg.succs[path[-1]]
        if succs:
            for s in succs:
                assert s not in path, "oracle requires acyclic control flow"
                stack.append(path + [s])
        # score every path prefix; maximal paths subsume them anyway, but
        # scoring here keeps the loop simple
        last_def: dict[str, int] = {}
        for nid in path:
            uses, defs = def_use[nid]
            for var in uses:
                if var in last_def:
                    result[(nid, var)].add(last_def[var])
            for var in defs:
                last_def[var] = nid
    return result


def reaching_by_bitsets(func: AstNode,
                        config: DefUseConfig | None = None
                        ) -> dict[tuple[int, str], set[int]]:
    """Fixpoint oracle over bitmask transfer functions, loops included."""
    config = config or DefUseConfig()
    cfg = _Cfg(func)
    def_use = {n.id: _flow_def_uses(n, config) for n in cfg.order}
    preds = cfg.preds()

    slots: list[tuple[str, int]] = []
    for node in cfg.order:
        for var in sorted(def_use[node.id][1]):
            slots.append((var, node.id))
    bit_of = {pair: 1 << i for i, pair in enumerate(slots)}

    gen = {}
    kill = {}
    for node in cfg.order:
        _, defs = def_use[node.id]
        gen[node.id] = 0
        kill[node.id] = 0
        for var in defs:
            gen[node.id] |= bit_of[(var, node.id)]
            for (v, d), bit in bit_of.items():
                if v == var:
                    kill[node.id] |= bit
    in_bits = {n.id: 0 for n in cfg.order}
    out_bits = {n.id: 0 for n in cfg.order}
    stable = False
    while not stable:
        stable = True
        for node in reversed(cfg.order):  # opposite sweep order to the implementation
            nid = node.id
            new_in = 0
            for p in preds[nid]:
                new_in |= out_bits[p]
            new_out = gen[nid] | (new_in & ~kill[nid])
            if new_in != in_bits[nid] or new_out != out_bits[nid]:
                in_bits[nid] = new_in
                out_bits[nid] = new_out
                stable = False

    result: dict[tuple[int, str], set[int]] = {}
    for node in cfg.order:
        uses, _ = def_use[node.id]
        for var in uses:
            reaching = set()
            for (v, d), bit in bit_of.items():
                if v == var and in_bits[node.id] & bit:
                    reaching.add(d)
            result[(node.id, var)] = reaching
    return result


def trim_oracle(g: CodeTransformationGraph,
                hop_limit: int | None = None) -> tuple[set[int], set[tuple]]:
    """Brute-force relevance closure by whole-edge-list scans."""
    changed = {n.id for n in g.nodes if n.alpha != "unchanged"}
    if not changed:
        return set(), set()
    by_id = {n.id: n for n in g.nodes}
    struct = [(e.src, e.dst) for e in g.edges if e.relation.cls == "structure"]
    dep = [(e.src, e.dst) for e in g.edges if e.relation.cls == "dependency"]

    def ancestors(seeds: set[int]) -> set[int]:
        seen: set[int] = set()
        frontier = set(seeds)
        while frontier:
            frontier = {s for (s, d) in struct if d in frontier} - seen
            seen |= frontier
        return seen

    def descendants(seeds: set[int]) -> set[int]:
        seen: set[int] = set()
        frontier = set(seeds)
        while frontier:
            frontier = {d for (s, d) in struct if s in frontier} - seen
            seen |= frontier
        return seen

    relevant = set(changed)
    for anc in ancestors(changed):
        if by_id[anc].is_statement or by_id[anc].is_predicate:
            relevant.add(anc)

    if hop_limit is None:
        grew = True
        while grew:
            grew = False
            for s, d in dep:
                if (s in relevant) != (d in relevant):
                    relevant |= {s, d}
                    grew = True
    else:
        frontier = set(relevant)
        for _ in range(hop_limit):
            nxt = set()
            for s, d in dep:
                if s in frontier and d not in relevant:
                    nxt.add(d)
                if d in frontier and s not in relevant:
                    nxt.add(s)
            relevant |= nxt
            frontier = nxt

    relevant |= descendants(relevant)
    keep = relevant | ancestors(relevant)
    kept_edges = {
        (e.src, e.dst, e.relation.cls, e.relation.subtype, e.alpha)
        for e in g.edges if e.src in keep and e.dst in keep
    }
    return keep, kept_edges


# --- naive message-passing oracles (pure-python per-node loops) ---

def naive_rgcn(weights, edges, feats, self_loop=False):
    """weights: {relation class -> d_in x d_out array}; edges: iterable of
    (src_row, dst_row, relation class); feats: |N| x d_in array."""
    import numpy as np

    n = feats.shape[0]
    d_out = next(iter(weights.values())).shape[1]
    out = np.zeros((n, d_out))
    for i in range(n):
        total = np.zeros(d_out)
        for rel, w in weights.items():
            neighbors = sorted({s for s, d, r in edges if d == i and r == rel})
            if not neighbors:
                continue
            msg = np.zeros(d_out)
            for j in neighbors:
                msg += feats[j] @ w
            total += msg / len(neighbors)
        if self_loop:
            total += feats[i]
        out[i] = np.maximum(total, 0.0)
    return out


def naive_rgat(weights, queries, keys, edges, feats, slope=0.2):
    """Returns (|N| x d_out array, {(i, j, relation class) -> weight})."""
    import math

    import numpy as np

    n = feats.shape[0]
    d_out = next(iter(weights.values())).shape[1]
    out = np.zeros((n, d_out))
    attention = {}
    for i in range(n):
        total = np.zeros(d_out)
        for rel, w in weights.items():
            neighbors = sorted({s for s, d, r in edges if d == i and r == rel})
            if not neighbors:
                continue
            g = {j: feats[j] @ w for j in set(neighbors) | {i}}
            q_i = float(g[i] @ queries[rel])
            logits = []
            for j in neighbors:
                e = q_i + float(g[j] @ keys[rel])
                logits.append(e if e > 0 else slope * e)
            high = max(logits)
            exps = [math.exp(z - high) for z in logits]
            denom = sum(exps)
            for j, ez in zip(neighbors, exps):
                a = ez / denom
                attention[(i, j, rel)] = a
                total += a * g[j]
        out[i] = np.maximum(total, 0.0)
    return out, attention


def random_risk_graph(rng, n_nodes, tokens, n_edges=None):
    """A random change graph with shuffled non-dense node ids."""
    from commitrisk.ctg import CodeTransformationGraph, CtgEdge, CtgNode
    from commitrisk.graphs import CONTROL, DATA, STRUCTURE

    ids = rng.sample(range(1000), n_nodes)
    alphas = ["unchanged", "added", "deleted"]
    kinds = ["identifier", "literal", "assign-stmt", "binary-op"]
    nodes = [CtgNode(i, rng.choice(kinds), rng.choice(tokens),
                     rng.randrange(1, 9), None, rng.random() < 0.5,
                     False, rng.choice(alphas)) for i in ids]
    if n_edges is None:
        n_edges = rng.randrange(0, 3 * n_nodes + 1)
    relations = [STRUCTURE, DATA, CONTROL]
    edges = []
    for _ in range(n_edges):
        src, dst = rng.choice(ids), rng.choice(ids)
        edges.append(CtgEdge(src, dst, rng.choice(relations), rng.choice(alphas)))
    provenance = {i: (None, None) for i in ids}
    return CodeTransformationGraph(nodes, edges, provenance)


def relabeled_copy(g, rng):
    """Same graph under a random node-id permutation, nodes and edges
    reordered; forward results must not change."""
    from dataclasses import replace

    from commitrisk.ctg import CodeTransformationGraph

    ids = [n.id for n in g.nodes]
    fresh = rng.sample(range(2000, 5000), len(ids))
    mapping = dict(zip(ids, fresh))
    nodes = [replace(n, id=mapping[n.id]) for n in g.nodes]
    rng.shuffle(nodes)
    edges = [replace(e, src=mapping[e.src], dst=mapping[e.dst]) for e in g.edges]
    rng.shuffle(edges)
    provenance = {mapping[k]: v for k, v in g.provenance.items()}
    return CodeTransformationGraph(nodes, edges, provenance), mapping


def blame_replay(corpus, path, at):
    """Forward-replay blame oracle: walk the chain root-to-tip applying line
    diffs and tracking each line's origin commit; returns origin list
    (1-based access via [line - 1]) for the content at `at`."""
    from commitrisk.corpus import diff_lines

    chain = list(reversed(corpus.chain(at)))
    origins = None
    for rec in chain:
        if path not in rec.files:
            continue
        change = rec.files[path]
        if change.before is None:
            origins = [rec.id] * len((change.after or "").splitlines())
            continue
        pairs, _, _ = diff_lines(change.before, change.after or "")
        matched = {j: i for i, j in pairs}
        new_origins = []
        for j in range(len((change.after or "").splitlines())):
            if j in matched and origins is not None:
                new_origins.append(origins[matched[j]])
            else:
                new_origins.append(rec.id)
        origins = new_origins
    return origins
