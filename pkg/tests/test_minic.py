"""Frontend tests: tokenizing, parsing, and the canonical printer."""
import random

import pytest

from commitrisk.minic import (LexError, ParseError, ast_to_json, canonical_print,
                              parse, parse_source, structural_equal, tokenize)
from commitrisk import synth

from conftest import BEFORE_SRC, find_nodes, find_one


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_golden_line():
    toks = tokenize("int len = strlen(str);")
    assert [t.text for t in toks] == ["int", "len", "=", "strlen", "(", "str", ")", ";"]
    assert [t.kind for t in toks] == [
        "keyword", "identifier", "operator", "identifier",
        "punctuation", "identifier", "punctuation", "punctuation",
    ]


def test_tokenize_illegal_char():
    with pytest.raises(LexError) as exc:
        tokenize("@")
    assert exc.value.line == 1
    assert exc.value.col == 1


def test_tokenize_positions_index_source():
    source = "int a = 1;\n// note\nchar* p;  /* x */ a = a + 2;\n"
    lines = source.split("\n")
    for tok in tokenize(source):
        at = lines[tok.line - 1][tok.col - 1:tok.col - 1 + len(tok.text)]
        assert at == tok.text


def test_tokenize_two_char_operators():
    toks = tokenize("a->b <= c && d != e")
    assert [t.text for t in toks] == ["a", "->", "b", "<=", "c", "&&", "d", "!=", "e"]


def test_tokenize_literals():
    toks = tokenize('x = "a\\"b"; c = \'\\n\'; n = 42;')
    kinds = {t.text: t.kind for t in toks}
    assert kinds['"a\\"b"'] == "string-literal"
    assert kinds["'\\n'"] == "char-literal"
    assert kinds["42"] == "int-literal"


def test_tokenize_unterminated_string():
    with pytest.raises(LexError):
        tokenize('x = "abc')
    with pytest.raises(LexError):
        tokenize("/* never closed")


def test_parse_minimal_function():
    ast = parse(tokenize("void f(){}"))
    assert [n.kind for n in ast.root.walk()] == [
        "translation-unit", "function-def", "block"]


def test_parse_overflow_function_predicate_flag():
    ast = parse_source(BEFORE_SRC)
    predicates = [n for n in ast.root.walk() if n.is_predicate]
    assert len(predicates) == 1
    assert predicates[0].kind == "binary-op"
    assert predicates[0].label == "<"


def test_parse_missing_expression():
    with pytest.raises(ParseError):
        parse(tokenize("int x = ;"))


def test_parse_error_reports_position():
    with pytest.raises(ParseError) as exc:
        parse_source("void f() {\n    x = ;\n}")
    assert exc.value.line == 2
    assert "expected" in str(exc.value)


def test_parse_keyword_not_a_name():
    with pytest.raises(ParseError):
        parse_source("int if = 3;")


def test_parse_rejects_bad_assignment_target():
    with pytest.raises(ParseError):
        parse_source("void f() { f(x) = 3; }")


def test_node_ids_dense_preorder():
    ast = parse_source(BEFORE_SRC)
    assert [n.id for n in ast.root.walk()] == list(range(len(ast.nodes())))


def test_statement_and_predicate_flags():
    ast = parse_source(BEFORE_SRC)
    stmts = {n.kind for n in ast.root.walk() if n.is_statement}
    assert stmts == {"decl-stmt", "assign-stmt", "if-stmt", "expr-stmt"}
    for node in ast.root.walk():
        assert node.is_statement == (node.kind in {
            "decl-stmt", "expr-stmt", "assign-stmt", "if-stmt",
            "while-stmt", "return-stmt"})


def test_member_chain_is_single_leaf():
    ast = parse_source("void f() { x = st->codec.extradata; }")
    member = find_one(ast, kind="member-access")
    assert member.label == "st->codec.extradata"
    assert member.children == []


def test_precedence_shapes():
    ast = parse_source("void f() { x = a + b * c; }")
    assign = find_one(ast, kind="assign-stmt")
    plus = assign.children[1]
    assert plus.label == "+"
    assert plus.children[1].label == "*"

    ast2 = parse_source("void f() { x = (a + b) * c; }")
    times = find_one(ast2, kind="assign-stmt").children[1]
    assert times.label == "*"
    assert times.children[0].label == "+"


def test_left_associativity():
    ast = parse_source("void f() { x = a - b - c; }")
    outer = find_one(ast, kind="assign-stmt").children[1]
    assert outer.children[0].label == "-"
    assert outer.children[1].label == "c"


def test_canonical_print_golden_empty_function():
    ast = parse(tokenize("void f(){}"))
    assert canonical_print(ast) == "void f() {\n}\n"


def test_canonical_print_contains_assignment():
    ast = parse_source("void f() {\n  x=a+b;\n}")
    assert "x = a + b;" in canonical_print(ast)


ROUND_TRIP_SOURCES = [
    "void f(){}",
    "int g;",
    "char* p = q;",
    "void f(int a, char* b) { return; }",
    "void f() { int xs[10]; xs[2] = xs[1] + 1; }",
    "void f() { if (a < b) x = 1; else { y = 2; z = 3; } }",
    "void f() { while (i < n) { i = i + 1; } }",
    "void f() { x = -y + !z * &w; }",
    "void f() { x = a || b && c == d; }",
    "void f() { p = a->b.c; q = a->b[i]; }",
    "void f() { g(); h(1, x + 2, \"s\"); }",
    "void f() { if (a) if (b) c(); else d(); }",
    "void f() { return f2(x) % 3; }",
    "void f() { x = (a + b) * (c - d) / e; }",
]


@pytest.mark.parametrize("source", ROUND_TRIP_SOURCES)
def test_round_trip_structural(source):
    ast = parse_source(source)
    printed = canonical_print(ast)
    again = parse_source(printed)
    assert structural_equal(ast.root, again.root)
    # printing is a fixpoint after one pass
    assert canonical_print(again) == printed


def test_round_trip_random_programs():
    rng = random.Random(1234)
    for _ in range(40):
        source = synth.random_acyclic_function(rng)
        ast = parse_source(source)
        again = parse_source(canonical_print(ast))
        assert structural_equal(ast.root, again.root)


def test_parse_determinism():
    a = canonical_print(parse_source(BEFORE_SRC))
    b = canonical_print(parse_source(BEFORE_SRC))
    assert a == b


def test_ast_to_json_schema():
    ast = parse_source("void f() { x = 1; }")
    doc = ast_to_json(ast)
    assert doc["kind"] == "translation-unit"
    assert set(doc) == {"id", "kind", "label", "line", "is_statement",
                        "is_predicate", "children"}
    func = doc["children"][0]
    assert func["kind"] == "function-def"
    assert func["label"] == "void f"


def test_array_declarator_size_is_leaf():
    ast = parse_source("void f() { char buf[BUF_SIZE]; }")
    decl = find_one(ast, kind="decl-stmt")
    declarator = decl.children[0]
    assert declarator.kind == "index"
    assert [c.label for c in declarator.children] == ["buf", "BUF_SIZE"]


def test_call_label_holds_callee():
    ast = parse_source("void f() { memcpy(buf, str, len); }")
    call = find_one(ast, kind="call")
    assert call.label == "memcpy"
    assert [c.label for c in call.children] == ["buf", "str", "len"]
    assert not find_nodes(ast, kind="identifier", label="memcpy")
