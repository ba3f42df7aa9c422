"""Graph construction tests: reaching definitions, control dependence,
and the relational code graph, checked against independent oracles."""
import random

from commitrisk.graphs import (CONTROL, DATA, DefUseConfig, STRUCTURE, build_rcg,
                               control_dependence, rcg_to_dot, rcg_to_json,
                               reaching_definitions)
from commitrisk.minic import parse_source
from commitrisk import synth

from conftest import BEFORE_SRC, find_nodes, find_one
from helpers import reaching_by_bitsets, reaching_by_paths


def _func(source: str):
    ast = parse_source(source)
    return ast, find_one(ast, kind="function-def")


def _stmt_by_text(ast, snippet: str):
    # innermost match: an if/while statement's text contains its body
    hits = [n for n in ast.root.walk()
            if n.is_statement and snippet in _render(n)]
    if not hits:
        raise AssertionError(f"no statement matching {snippet!r}")
    return min(hits, key=lambda n: len(_render(n)))


def _render(node) -> str:
    from commitrisk.minic import node_text
    return node_text(node)


def test_straight_line_reaching():
    ast, func = _func("void f() { x = 1; y = x; }")
    rd = reaching_definitions(func)
    x_def = _stmt_by_text(ast, "x = 1")
    y_stmt = _stmt_by_text(ast, "y = x")
    assert rd[(y_stmt.id, "x")] == {x_def.id}


def test_branch_reaching_both_defs():
    ast, func = _func("void f() { x = 1; if (c) x = 2; y = x; }")
    rd = reaching_definitions(func)
    first = _stmt_by_text(ast, "x = 1")
    second = _stmt_by_text(ast, "x = 2")
    use = _stmt_by_text(ast, "y = x")
    assert rd[(use.id, "x")] == {first.id, second.id}


def test_loop_reaching_fixpoint():
    ast, func = _func(
        "void f() { int x = 0; while (c) { x = x + 1; } y = x; }")
    rd = reaching_definitions(func)
    decl = _stmt_by_text(ast, "int x = 0")
    loop_def = _stmt_by_text(ast, "x = x + 1")
    after = _stmt_by_text(ast, "y = x")
    # the in-loop definition reaches its own use (around the loop) and the exit
    assert rd[(loop_def.id, "x")] == {decl.id, loop_def.id}
    assert rd[(after.id, "x")] == {decl.id, loop_def.id}


def test_straight_line_redefinition_kills():
    ast, func = _func("void f() { x = 1; x = 2; y = x; }")
    rd = reaching_definitions(func)
    second = _stmt_by_text(ast, "x = 2")
    use = _stmt_by_text(ast, "y = x")
    assert rd[(use.id, "x")] == {second.id}


def test_return_stops_fallthrough():
    ast, func = _func("void f() { x = 1; if (c) { x = 2; return; } y = x; }")
    rd = reaching_definitions(func)
    first = _stmt_by_text(ast, "x = 1")
    use = _stmt_by_text(ast, "y = x")
    # the then-branch definition never falls through to y = x
    assert rd[(use.id, "x")] == {first.id}


def test_output_param_and_addressof_define():
    ast, func = _func(
        "void f() { char b[9]; int x; memcpy(b, s, n); read_into(&x, 4);"
        " y = x; use(b); }")
    rd = reaching_definitions(func)
    memcpy_stmt = _stmt_by_text(ast, "memcpy(")
    read_stmt = _stmt_by_text(ast, "read_into(")
    decl_b = _stmt_by_text(ast, "char b[9]")
    use_b = _stmt_by_text(ast, "use(b)")
    use_x = _stmt_by_text(ast, "y = x")
    assert rd[(use_b.id, "b")] == {memcpy_stmt.id}  # memcpy redefines b
    assert read_stmt.id in rd[(use_x.id, "x")]
    assert decl_b.id in rd[(memcpy_stmt.id, "b")]


def test_control_dependence_single_branch():
    ast, func = _func("void f() { if (c) x = 1; }")
    pred = find_one(ast, kind="identifier", label="c")
    stmt = _stmt_by_text(ast, "x = 1")
    assert control_dependence(func) == {(pred.id, stmt.id)}


def test_control_dependence_innermost_wins():
    ast, func = _func("void f() { if (c) { if (d) x = 1; } }")
    pred_c = find_one(ast, kind="identifier", label="c")
    pred_d = find_one(ast, kind="identifier", label="d")
    inner_if = [n for n in find_nodes(ast, kind="if-stmt") if n.children[0].label == "d"]
    stmt = _stmt_by_text(ast, "x = 1")
    deps = control_dependence(func)
    assert (pred_d.id, stmt.id) in deps
    assert (pred_c.id, stmt.id) not in deps
    assert (pred_c.id, inner_if[0].id) in deps


def test_control_dependence_top_level_empty():
    _, func = _func("void f() { x = 1; }")
    assert control_dependence(func) == set()


def test_control_dependence_else_and_while():
    ast, func = _func(
        "void f() { if (c) a = 1; else b = 2; while (w) { d = 3; } }")
    deps = control_dependence(func)
    pred_c = find_one(ast, kind="identifier", label="c")
    pred_w = find_one(ast, kind="identifier", label="w")
    a_stmt = _stmt_by_text(ast, "a = 1")
    b_stmt = _stmt_by_text(ast, "b = 2")
    d_stmt = _stmt_by_text(ast, "d = 3")
    assert {(pred_c.id, a_stmt.id), (pred_c.id, b_stmt.id),
            (pred_w.id, d_stmt.id)} == deps


def test_build_rcg_overflow_example_edges():
    ast = parse_source(BEFORE_SRC)
    g = build_rcg(ast)
    decl_str = _stmt_by_text(ast, "char* str")
    decl_buf = _stmt_by_text(ast, "char buf")
    assign_len = _stmt_by_text(ast, "len = strlen(str)")
    pred = find_one(ast, kind="binary-op", label="<")
    memcpy_stmt = _stmt_by_text(ast, "memcpy(")
    dep_edges = {(e.src, e.dst, e.relation) for e in g.edges
                 if e.relation.cls == "dependency"}
    assert dep_edges == {
        (decl_str.id, assign_len.id, DATA),
        (decl_str.id, memcpy_stmt.id, DATA),
        (decl_buf.id, memcpy_stmt.id, DATA),
        (assign_len.id, pred.id, DATA),
        (assign_len.id, memcpy_stmt.id, DATA),
        (pred.id, memcpy_stmt.id, CONTROL),
    }


def test_rcg_structure_edges_form_tree():
    for source in (BEFORE_SRC, "void f(){}", "int g;\nvoid f(int a) { g = a; }"):
        g = build_rcg(parse_source(source))
        indegree = {n.id: 0 for n in g.nodes}
        for e in g.edges:
            if e.relation is STRUCTURE or e.relation.cls == "structure":
                indegree[e.dst] += 1
        roots = [nid for nid, deg in indegree.items() if deg == 0]
        assert roots == [0]
        assert all(deg == 1 for nid, deg in indegree.items() if nid != 0)


def test_rcg_dependency_endpoints_are_statements_or_predicates():
    rng = random.Random(7)
    for _ in range(25):
        g = build_rcg(parse_source(synth.random_acyclic_function(rng)))
        flags = {n.id: n.is_statement or n.is_predicate for n in g.nodes}
        for e in g.edges:
            if e.relation.cls == "dependency":
                assert flags[e.src] and flags[e.dst]


def test_rcg_no_duplicate_edges_and_deterministic():
    g1 = build_rcg(parse_source(BEFORE_SRC))
    g2 = build_rcg(parse_source(BEFORE_SRC))
    keys = [(e.src, e.dst, e.relation.cls, e.relation.subtype) for e in g1.edges]
    assert len(keys) == len(set(keys))
    assert g1.edges == g2.edges


def test_empty_function_structure_only():
    g = build_rcg(parse_source("void f(){}"))
    assert all(e.relation.cls == "structure" for e in g.edges)


def test_reaching_matches_path_oracle_random():
    rng = random.Random(99)
    for _ in range(30):
        source = synth.random_acyclic_function(rng)
        func = find_one(parse_source(source), kind="function-def")
        assert reaching_definitions(func) == reaching_by_paths(func)


def test_reaching_matches_bitset_oracle_with_loops():
    rng = random.Random(100)
    sources = [synth.random_looping_function(rng) for _ in range(15)]
    sources.append("void f() { int x = 0; while (c) { x = x + 1; } y = x; }")
    sources.append(
        "void f() { int i = 0; while (i < n) { if (i > 2) s = s + i; i = i + 1; } }")
    for source in sources:
        func = find_one(parse_source(source), kind="function-def")
        assert reaching_definitions(func) == reaching_by_bitsets(func)


def test_rcg_json_and_dot_exports():
    g = build_rcg(parse_source(BEFORE_SRC))
    doc = rcg_to_json(g)
    assert set(doc) == {"nodes", "edges"}
    assert set(doc["edges"][0]) == {"src", "dst", "class", "subtype"}
    dot = rcg_to_dot(g)
    assert dot.startswith("digraph")
    assert "style=dashed" in dot and "style=dotted" in dot and "style=solid" in dot


def test_defuse_config_is_configurable():
    source = "void f() { int q; fill(q, 3); y = q; }"
    ast = parse_source(source)
    func = find_one(ast, kind="function-def")
    fill_stmt = _stmt_by_text(ast, "fill(")
    use = _stmt_by_text(ast, "y = q")
    plain = reaching_definitions(func)
    assert fill_stmt.id not in plain[(use.id, "q")]
    custom = reaching_definitions(func, DefUseConfig(output_params={"fill": (0,)}))
    assert fill_stmt.id in custom[(use.id, "q")]
