"""Relational code graph of one source version.

Nodes are the AST nodes; edges come in two classes: structure (the AST
tree itself) and dependency (data and control dependencies between
statement/predicate nodes). Data dependencies are computed by classic
reaching definitions over the structured control flow; control
dependencies fall out syntactically because MiniC has no goto.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .minic import Ast, AstNode

_SIMPLE_STMTS = {"decl-stmt", "expr-stmt", "assign-stmt", "return-stmt"}


@dataclass(frozen=True)
class Relation:
    cls: str  # structure | dependency
    subtype: str  # tree | data | control


STRUCTURE = Relation("structure", "tree")
DATA = Relation("dependency", "data")
CONTROL = Relation("dependency", "control")


@dataclass
class GraphNode:
    id: int
    kind: str
    label: str
    line: int
    is_statement: bool
    is_predicate: bool


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    relation: Relation


@dataclass
class RelationalCodeGraph:
    nodes: list[GraphNode]
    edges: list[Edge]
    # Source tree kept for version matching; not part of the graph value.
    ast: Ast | None = field(default=None, compare=False, repr=False)

    def node_by_id(self, node_id: int) -> GraphNode:
        for node in self.nodes:
            if node.id == node_id:
                return node
        raise KeyError(node_id)


@dataclass
class DefUseConfig:
    """Which call arguments count as definitions (written through).

    Maps callee name to the 0-based argument positions it writes. The
    defaults cover the classic memory helpers where the destination
    buffer is an output parameter.
    """

    output_params: dict[str, tuple[int, ...]] = field(default_factory=lambda: {
        "memcpy": (0,),
        "strcpy": (0,),
        "memset": (0,),
        "avio_read": (1,),
    })


def _base_variable(expr: AstNode) -> str | None:
    """The variable a write through this expression lands on, if any."""
    if expr.kind in ("identifier", "member-access"):
        return expr.label
    if expr.kind == "index":
        return _base_variable(expr.children[0])
    if expr.kind == "unary-op" and expr.label in ("&", "*"):
        return _base_variable(expr.children[0])
    return None


def _walk_expr(expr: AstNode, uses: set[str], defs: set[str],
               config: DefUseConfig) -> None:
    if expr.kind in ("identifier", "member-access"):
        uses.add(expr.label)
        return
    if expr.kind == "literal":
        return
    if expr.kind == "call":
        written = config.output_params.get(expr.label, ())
        for pos, arg in enumerate(expr.children):
            _walk_expr(arg, uses, defs, config)
            base = _base_variable(arg)
            if base is not None and (pos in written
                                     or (arg.kind == "unary-op" and arg.label == "&")):
                defs.add(base)
        return
    for child in expr.children:
        _walk_expr(child, uses, defs, config)


def _lvalue_def_uses(lvalue: AstNode, uses: set[str], defs: set[str],
                     config: DefUseConfig) -> None:
    if lvalue.kind in ("identifier", "member-access"):
        defs.add(lvalue.label)
        return
    # index: the base is written, subscripts are read
    _lvalue_def_uses(lvalue.children[0], uses, defs, config)
    _walk_expr(lvalue.children[1], uses, defs, config)


def _flow_def_uses(node: AstNode, config: DefUseConfig) -> tuple[set[str], set[str]]:
    """(uses, defs) of one flow node (simple statement or predicate)."""
    uses: set[str] = set()
    defs: set[str] = set()
    if node.kind == "decl-stmt":
        declarator = node.children[0]
        if declarator.kind == "index":
            defs.add(declarator.children[0].label)
            _walk_expr(declarator.children[1], uses, defs, config)
        else:
            defs.add(declarator.label)
        if len(node.children) > 1:
            _walk_expr(node.children[1], uses, defs, config)
    elif node.kind == "assign-stmt":
        _lvalue_def_uses(node.children[0], uses, defs, config)
        _walk_expr(node.children[1], uses, defs, config)
    elif node.kind in ("expr-stmt", "return-stmt"):
        for child in node.children:
            _walk_expr(child, uses, defs, config)
    else:  # predicate expression
        _walk_expr(node, uses, defs, config)
    return uses, defs


class _Cfg:
    """Intra-function control flow over simple statements and predicates."""

    def __init__(self, func: AstNode):
        self.order: list[AstNode] = []
        self.succs: dict[int, list[int]] = {}
        body = func.children[-1]
        self._wire_seq(body.children, [])

    def _node(self, ast_node: AstNode) -> int:
        if ast_node.id not in self.succs:
            self.order.append(ast_node)
            self.succs[ast_node.id] = []
        return ast_node.id

    def _connect(self, preds: list[int], node_id: int) -> None:
        for p in preds:
            if node_id not in self.succs[p]:
                self.succs[p].append(node_id)

    def _wire_seq(self, stmts: list[AstNode], preds: list[int]) -> list[int]:
        for stmt in stmts:
            preds = self._wire_stmt(stmt, preds)
        return preds

    def _wire_stmt(self, stmt: AstNode, preds: list[int]) -> list[int]:
        if stmt.kind == "block":
            return self._wire_seq(stmt.children, preds)
        if stmt.kind == "if-stmt":
            pred = self._node(stmt.children[0])
            self._connect(preds, pred)
            then_exits = self._wire_stmt(stmt.children[1], [pred])
            if len(stmt.children) > 2:
                else_exits = self._wire_stmt(stmt.children[2], [pred])
                return then_exits + else_exits
            return then_exits + [pred]
        if stmt.kind == "while-stmt":
            pred = self._node(stmt.children[0])
            self._connect(preds, pred)
            body_exits = self._wire_stmt(stmt.children[1], [pred])
            self._connect(body_exits, pred)
            return [pred]
        node = self._node(stmt)
        self._connect(preds, node)
        if stmt.kind == "return-stmt":
            return []  # no fallthrough
        return [node]

    def preds(self) -> dict[int, list[int]]:
        result: dict[int, list[int]] = {n.id: [] for n in self.order}
        for src, dsts in self.succs.items():
            for dst in dsts:
                result[dst].append(src)
        return result


def reaching_definitions(func: AstNode,
                         config: DefUseConfig | None = None
                         ) -> dict[tuple[int, str], set[int]]:
    """Which definitions reach each use site in one function.

    Returns a map from (flow node id, variable used there) to the set of
    flow node ids whose definition of that variable may reach it. Loops
    are handled by iterating the forward may-analysis to a fixpoint.
    """
    config = config or DefUseConfig()
    cfg = _Cfg(func)
    def_use = {n.id: _flow_def_uses(n, config) for n in cfg.order}
    preds = cfg.preds()

    in_sets: dict[int, set[tuple[str, int]]] = {n.id: set() for n in cfg.order}
    out_sets: dict[int, set[tuple[str, int]]] = {n.id: set() for n in cfg.order}
    changed = True
    while changed:
        changed = False
        for node in cfg.order:
            nid = node.id
            new_in: set[tuple[str, int]] = set()
            for p in preds[nid]:
                new_in |= out_sets[p]
            uses, defs = def_use[nid]
            new_out = {(v, nid) for v in defs}
            new_out |= {(v, d) for (v, d) in new_in if v not in defs}
            if new_in != in_sets[nid] or new_out != out_sets[nid]:
                in_sets[nid] = new_in
                out_sets[nid] = new_out
                changed = True

    result: dict[tuple[int, str], set[int]] = {}
    for node in cfg.order:
        uses, _ = def_use[node.id]
        for var in uses:
            result[(node.id, var)] = {d for (v, d) in in_sets[node.id] if v == var}
    return result


def _governed_statements(stmt: AstNode) -> list[AstNode]:
    """Statements directly governed by a branch/loop arm; blocks flatten."""
    if stmt.kind == "block":
        out: list[AstNode] = []
        for child in stmt.children:
            out.extend(_governed_statements(child))
        return out
    return [stmt]


def control_dependence(func: AstNode) -> set[tuple[int, int]]:
    """(predicate id, statement id) pairs; innermost predicate wins."""
    deps: set[tuple[int, int]] = set()

    def visit(stmt: AstNode) -> None:
        if stmt.kind == "block":
            for child in stmt.children:
                visit(child)
        elif stmt.kind == "if-stmt":
            pred = stmt.children[0]
            for arm in stmt.children[1:]:
                for governed in _governed_statements(arm):
                    deps.add((pred.id, governed.id))
                visit(arm)
        elif stmt.kind == "while-stmt":
            pred = stmt.children[0]
            for governed in _governed_statements(stmt.children[1]):
                deps.add((pred.id, governed.id))
            visit(stmt.children[1])

    visit(func.children[-1])
    return deps


def build_rcg(ast: Ast, defuse: DefUseConfig | None = None) -> RelationalCodeGraph:
    """Build the relational code graph of one version."""
    defuse = defuse or DefUseConfig()
    nodes = [GraphNode(n.id, n.kind, n.label, n.line, n.is_statement, n.is_predicate)
             for n in ast.root.walk()]
    edges: list[Edge] = []
    for node in ast.root.walk():
        for child in node.children:
            edges.append(Edge(node.id, child.id, STRUCTURE))
    for item in ast.root.children:
        if item.kind != "function-def":
            continue
        data_pairs: set[tuple[int, int]] = set()
        for (use_site, _var), def_sites in reaching_definitions(item, defuse).items():
            for d in def_sites:
                data_pairs.add((d, use_site))
        for src, dst in sorted(data_pairs):
            edges.append(Edge(src, dst, DATA))
        for src, dst in sorted(control_dependence(item)):
            edges.append(Edge(src, dst, CONTROL))
    return RelationalCodeGraph(nodes, edges, ast)


def rcg_to_json(g: RelationalCodeGraph) -> dict:
    return {
        "nodes": [
            {"id": n.id, "kind": n.kind, "label": n.label, "line": n.line,
             "is_statement": n.is_statement, "is_predicate": n.is_predicate}
            for n in g.nodes
        ],
        "edges": [
            {"src": e.src, "dst": e.dst, "class": e.relation.cls,
             "subtype": e.relation.subtype}
            for e in g.edges
        ],
    }


_DOT_STYLE = {"tree": "solid", "data": "dashed", "control": "dotted"}


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def rcg_to_dot(g: RelationalCodeGraph, name: str = "rcg") -> str:
    lines = [f"digraph {name} {{"]
    for n in g.nodes:
        label = _dot_escape(f"{n.id}:{n.kind}" + (f":{n.label}" if n.label else ""))
        lines.append(f'  n{n.id} [label="{label}"];')
    for e in g.edges:
        style = _DOT_STYLE[e.relation.subtype]
        lines.append(f'  n{e.src} -> n{e.dst} [style={style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
