"""Lexer, parser, and printer for MiniC, a small C-like language.

MiniC covers declarations (including one-dimensional arrays), assignments,
calls, if/else, while, return, member-access chains, and the usual
arithmetic/comparison/logical operators. There is no preprocessor and no
for/switch/goto. The parser produces a plain AST whose nodes carry stable
pre-order ids; the printer emits a canonical text form that parses back to
a structurally identical tree.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

KEYWORDS = {"int", "char", "void", "if", "else", "while", "return"}
TYPE_KEYWORDS = ("int", "char", "void")

# Longest-match first; '->' must come before '-' and '>'.
TWO_CHAR_OPS = ("||", "&&", "==", "!=", "<=", ">=", "->")
ONE_CHAR_OPS = ("<", ">", "+", "-", "*", "/", "%", "!", "&", "=", ".")
PUNCT = "(){}[],;"

STATEMENT_KINDS = {
    "decl-stmt", "expr-stmt", "assign-stmt", "if-stmt", "while-stmt",
    "return-stmt",
}


class LexError(Exception):
    """Raised on an illegal character or unterminated literal."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} at line {line}, col {col}")
        self.line = line
        self.col = col


class ParseError(Exception):
    """Raised when the token stream does not match the grammar."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} at line {line}, col {col}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # identifier | keyword | int-literal | string-literal | char-literal | operator | punctuation
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    """Split source text into tokens, dropping whitespace and comments."""
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(source)

    def advance(k: int) -> None:
        nonlocal i, line, col
        for _ in range(k):
            if source[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        c = source[i]
        if c in " \t\r\n":
            advance(1)
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                advance(1)
            continue
        if source.startswith("/*", i):
            start_line, start_col = line, col
            advance(2)
            while i < n and not source.startswith("*/", i):
                advance(1)
            if i >= n:
                raise LexError("unterminated comment", start_line, start_col)
            advance(2)
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            kind = "keyword" if text in KEYWORDS else "identifier"
            tokens.append(Token(kind, text, line, col))
            advance(j - i)
            continue
        if c.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            tokens.append(Token("int-literal", source[i:j], line, col))
            advance(j - i)
            continue
        if c in "\"'":
            quote = c
            start_line, start_col = line, col
            j = i + 1
            while j < n and source[j] != quote:
                if source[j] == "\\" and j + 1 < n:
                    j += 2
                else:
                    j += 1
            if j >= n:
                what = "string" if quote == '"' else "char"
                raise LexError(f"unterminated {what} literal", start_line, start_col)
            text = source[i:j + 1]
            kind = "string-literal" if quote == '"' else "char-literal"
            tokens.append(Token(kind, text, line, col))
            advance(j + 1 - i)
            continue
        two = source[i:i + 2]
        if two in TWO_CHAR_OPS:
            tokens.append(Token("operator", two, line, col))
            advance(2)
            continue
        if c in ONE_CHAR_OPS:
            tokens.append(Token("operator", c, line, col))
            advance(1)
            continue
        if c in PUNCT:
            tokens.append(Token("punctuation", c, line, col))
            advance(1)
            continue
        raise LexError(f"illegal character {c!r}", line, col)
    return tokens


@dataclass
class AstNode:
    """One AST node; ids are assigned densely in pre-order after parsing."""

    kind: str
    label: str = ""
    line: int = 0
    children: list["AstNode"] = field(default_factory=list)
    id: int = -1
    is_statement: bool = False
    is_predicate: bool = False

    def walk(self) -> Iterator["AstNode"]:
        """Yield this node and all descendants in pre-order."""
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass
class Ast:
    root: AstNode
    source_id: str = "<memory>"

    def nodes(self) -> list[AstNode]:
        return list(self.root.walk())

    def node_by_id(self, node_id: int) -> AstNode:
        for node in self.root.walk():
            if node.id == node_id:
                return node
        raise KeyError(node_id)


def _new(kind: str, label: str = "", line: int = 0,
         children: Optional[list[AstNode]] = None) -> AstNode:
    node = AstNode(kind, label, line, children or [])
    node.is_statement = kind in STATEMENT_KINDS
    return node


# Binary operator precedence, loosest first.
_BIN_PREC = {
    "||": 1, "&&": 2,
    "==": 3, "!=": 3,
    "<": 4, ">": 4, "<=": 4, ">=": 4,
    "+": 5, "-": 5,
    "*": 6, "/": 6, "%": 6,
}
_UNARY_OPS = ("-", "!", "&", "*")
_UNARY_PREC = 7
_POSTFIX_PREC = 8


class _Parser:
    def __init__(self, tokens: list[Token], source_id: str):
        self.tokens = tokens
        self.pos = 0
        self.source_id = source_id

    def peek(self, offset: int = 0) -> Optional[Token]:
        idx = self.pos + offset
        return self.tokens[idx] if idx < len(self.tokens) else None

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.text == text

    def take(self) -> Token:
        tok = self.peek()
        if tok is None:
            self.fail("unexpected end of input")
        self.pos += 1
        return tok

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok is None or tok.text != text:
            found = tok.text if tok else "end of input"
            self.fail(f"expected {text!r}, found {found!r}")
        return self.take()

    def fail(self, message: str) -> None:
        tok = self.peek()
        if tok is not None:
            raise ParseError(message, tok.line, tok.col)
        last = self.tokens[-1] if self.tokens else None
        line = last.line if last else 1
        col = last.col + len(last.text) if last else 1
        raise ParseError(message, line, col)

    # --- grammar ---

    def parse_unit(self) -> AstNode:
        first_line = self.tokens[0].line if self.tokens else 1
        unit = _new("translation-unit", "", first_line)
        while self.peek() is not None:
            unit.children.append(self.parse_top_level())
        return unit

    def parse_top_level(self) -> AstNode:
        tok = self.peek()
        if tok is None or tok.text not in TYPE_KEYWORDS:
            self.fail("expected a type at top level")
        # Look past the type and name to decide funcdef vs declaration.
        save = self.pos
        type_text, type_line = self.parse_type()
        name_tok = self.peek()
        if name_tok is None or name_tok.kind != "identifier":
            self.fail("expected a name after type")
        self.take()
        if self.at("("):
            return self.parse_funcdef_rest(type_text, name_tok, type_line)
        self.pos = save
        return self.parse_declstmt()

    def parse_type(self) -> tuple[str, int]:
        tok = self.take()
        if tok.text not in TYPE_KEYWORDS:
            raise ParseError(f"expected a type, found {tok.text!r}", tok.line, tok.col)
        text = tok.text
        while self.at("*"):
            self.take()
            text += "*"
        return text, tok.line

    def parse_funcdef_rest(self, type_text: str, name_tok: Token,
                           line: int) -> AstNode:
        func = _new("function-def", f"{type_text} {name_tok.text}", line)
        self.expect("(")
        if not self.at(")"):
            while True:
                func.children.append(self.parse_param())
                if self.at(","):
                    self.take()
                else:
                    break
        self.expect(")")
        func.children.append(self.parse_block())
        return func

    def parse_param(self) -> AstNode:
        type_text, line = self.parse_type()
        name_tok = self.take()
        if name_tok.kind != "identifier":
            raise ParseError(f"expected a parameter name, found {name_tok.text!r}",
                             name_tok.line, name_tok.col)
        param = _new("param", type_text, line)
        param.children.append(_new("identifier", name_tok.text, name_tok.line))
        return param

    def parse_block(self) -> AstNode:
        open_tok = self.expect("{")
        block = _new("block", "", open_tok.line)
        while not self.at("}"):
            if self.peek() is None:
                self.fail("unterminated block")
            block.children.append(self.parse_stmt())
        self.expect("}")
        return block

    def parse_stmt(self) -> AstNode:
        tok = self.peek()
        if tok is None:
            self.fail("expected a statement")
        if tok.text in TYPE_KEYWORDS:
            return self.parse_declstmt()
        if tok.text == "{":
            return self.parse_block()
        if tok.text == "if":
            return self.parse_if()
        if tok.text == "while":
            return self.parse_while()
        if tok.text == "return":
            self.take()
            ret = _new("return-stmt", "", tok.line)
            if not self.at(";"):
                ret.children.append(self.parse_expr())
            self.expect(";")
            return ret
        # assignment or expression statement
        expr = self.parse_expr()
        if self.at("="):
            eq = self.take()
            if expr.kind not in ("identifier", "index", "member-access"):
                raise ParseError("assignment target must be a name, index, or member",
                                 eq.line, eq.col)
            rhs = self.parse_expr()
            self.expect(";")
            return _new("assign-stmt", "=", expr.line, [expr, rhs])
        self.expect(";")
        return _new("expr-stmt", "", expr.line, [expr])

    def parse_declstmt(self) -> AstNode:
        type_text, line = self.parse_type()
        name_tok = self.take()
        if name_tok.kind != "identifier":
            raise ParseError(f"expected a declared name, found {name_tok.text!r}",
                             name_tok.line, name_tok.col)
        declarator: AstNode = _new("identifier", name_tok.text, name_tok.line)
        if self.at("["):
            self.take()
            size = self.parse_expr()
            self.expect("]")
            declarator = _new("index", "", name_tok.line, [declarator, size])
        decl = _new("decl-stmt", type_text, line, [declarator])
        if self.at("="):
            self.take()
            decl.children.append(self.parse_expr())
        self.expect(";")
        return decl

    def parse_if(self) -> AstNode:
        tok = self.expect("if")
        self.expect("(")
        cond = self.parse_expr()
        cond.is_predicate = True
        self.expect(")")
        then = self.parse_stmt()
        node = _new("if-stmt", "", tok.line, [cond, then])
        if self.at("else"):
            self.take()
            node.children.append(self.parse_stmt())
        return node

    def parse_while(self) -> AstNode:
        tok = self.expect("while")
        self.expect("(")
        cond = self.parse_expr()
        cond.is_predicate = True
        self.expect(")")
        body = self.parse_stmt()
        return _new("while-stmt", "", tok.line, [cond, body])

    def parse_expr(self, min_prec: int = 1) -> AstNode:
        left = self.parse_unary()
        while True:
            tok = self.peek()
            if tok is None or tok.kind != "operator":
                break
            prec = _BIN_PREC.get(tok.text)
            if prec is None or prec < min_prec:
                break
            self.take()
            right = self.parse_expr(prec + 1)  # left-associative
            left = _new("binary-op", tok.text, left.line, [left, right])
        return left

    def parse_unary(self) -> AstNode:
        tok = self.peek()
        if tok is not None and tok.kind == "operator" and tok.text in _UNARY_OPS:
            self.take()
            operand = self.parse_unary()
            return _new("unary-op", tok.text, tok.line, [operand])
        return self.parse_postfix()

    def parse_postfix(self) -> AstNode:
        node = self.parse_primary()
        while True:
            if self.at("("):
                if node.kind not in ("identifier", "member-access"):
                    self.fail("only a name or member chain can be called")
                open_tok = self.take()
                args: list[AstNode] = []
                if not self.at(")"):
                    while True:
                        args.append(self.parse_expr())
                        if self.at(","):
                            self.take()
                        else:
                            break
                self.expect(")")
                node = _new("call", node.label, node.line, args)
            elif self.at("["):
                self.take()
                sub = self.parse_expr()
                self.expect("]")
                node = _new("index", "", node.line, [node, sub])
            elif self.at(".") or self.at("->"):
                op = self.take()
                if node.kind not in ("identifier", "member-access"):
                    raise ParseError("member access needs a plain name chain on the left",
                                     op.line, op.col)
                name_tok = self.take()
                if name_tok.kind != "identifier":
                    raise ParseError(f"expected a member name, found {name_tok.text!r}",
                                     name_tok.line, name_tok.col)
                # Chains collapse to a single leaf labeled with the full text.
                node = _new("member-access", node.label + op.text + name_tok.text,
                            node.line)
            else:
                break
        return node

    def parse_primary(self) -> AstNode:
        tok = self.peek()
        if tok is None:
            self.fail("expected an expression")
        if tok.text == "(":
            self.take()
            expr = self.parse_expr()
            self.expect(")")
            return expr
        if tok.kind == "identifier":
            self.take()
            return _new("identifier", tok.text, tok.line)
        if tok.kind in ("int-literal", "string-literal", "char-literal"):
            self.take()
            return _new("literal", tok.text, tok.line)
        self.fail(f"expected an expression, found {tok.text!r}")
        raise AssertionError("unreachable")


def assign_ids(root: AstNode) -> None:
    """Number all nodes densely in pre-order, starting at 0."""
    for i, node in enumerate(root.walk()):
        node.id = i


def parse(tokens: list[Token], source_id: str = "<memory>") -> Ast:
    """Parse a token stream into an Ast with dense pre-order ids."""
    root = _Parser(tokens, source_id).parse_unit()
    assign_ids(root)
    return Ast(root, source_id)


def parse_source(source: str, source_id: str = "<memory>") -> Ast:
    return parse(tokenize(source), source_id)


# --- canonical printing ---

_INDENT = "    "


def _expr_text(node: AstNode, min_prec: int = 0) -> str:
    if node.kind in ("identifier", "literal", "member-access"):
        return node.label
    if node.kind == "call":
        args = ", ".join(_expr_text(a) for a in node.children)
        return f"{node.label}({args})"
    if node.kind == "index":
        base = _expr_text(node.children[0], _POSTFIX_PREC)
        return f"{base}[{_expr_text(node.children[1])}]"
    if node.kind == "unary-op":
        inner = _expr_text(node.children[0], _UNARY_PREC)
        return f"{node.label}{inner}"
    if node.kind == "binary-op":
        prec = _BIN_PREC[node.label]
        left = _expr_text(node.children[0], prec)
        right = _expr_text(node.children[1], prec + 1)
        text = f"{left} {node.label} {right}"
        return f"({text})" if prec < min_prec else text
    raise ValueError(f"not an expression node: {node.kind}")


def _declarator_text(node: AstNode) -> str:
    if node.kind == "identifier":
        return node.label
    base = node.children[0].label
    return f"{base}[{_expr_text(node.children[1])}]"


def _stmt_lines(node: AstNode, indent: str) -> list[str]:
    if node.kind == "decl-stmt":
        text = f"{node.label} {_declarator_text(node.children[0])}"
        if len(node.children) > 1:
            text += f" = {_expr_text(node.children[1])}"
        return [f"{indent}{text};"]
    if node.kind == "assign-stmt":
        lhs = _expr_text(node.children[0])
        return [f"{indent}{lhs} = {_expr_text(node.children[1])};"]
    if node.kind == "expr-stmt":
        return [f"{indent}{_expr_text(node.children[0])};"]
    if node.kind == "return-stmt":
        if node.children:
            return [f"{indent}return {_expr_text(node.children[0])};"]
        return [f"{indent}return;"]
    if node.kind == "block":
        lines = [f"{indent}{{"]
        for child in node.children:
            lines.extend(_stmt_lines(child, indent + _INDENT))
        lines.append(f"{indent}}}")
        return lines
    if node.kind == "if-stmt":
        cond = _expr_text(node.children[0])
        lines = _head_with_body(f"if ({cond})", node.children[1], indent)
        if len(node.children) > 2:
            lines.extend(_head_with_body("else", node.children[2], indent))
        return lines
    if node.kind == "while-stmt":
        cond = _expr_text(node.children[0])
        return _head_with_body(f"while ({cond})", node.children[1], indent)
    raise ValueError(f"not a statement node: {node.kind}")


def _head_with_body(head: str, body: AstNode, indent: str) -> list[str]:
    if body.kind == "block":
        lines = [f"{indent}{head} {{"]
        for child in body.children:
            lines.extend(_stmt_lines(child, indent + _INDENT))
        lines.append(f"{indent}}}")
        return lines
    return [f"{indent}{head}"] + _stmt_lines(body, indent + _INDENT)


def canonical_print(ast: Ast) -> str:
    """Render the tree in a fixed style that parses back to the same shape."""
    parts: list[str] = []
    for item in ast.root.children:
        if item.kind == "function-def":
            params = ", ".join(f"{p.label} {p.children[0].label}"
                               for p in item.children[:-1])
            lines = [f"{item.label}({params}) {{"]
            for child in item.children[-1].children:
                lines.extend(_stmt_lines(child, _INDENT))
            lines.append("}")
            parts.append("\n".join(lines) + "\n")
        else:
            parts.append("\n".join(_stmt_lines(item, "")) + "\n")
    return "\n".join(parts)


def node_text(node: AstNode) -> str:
    """Whitespace-normalized canonical text of a statement or expression."""
    if node.kind in STATEMENT_KINDS or node.kind == "block":
        return " ".join("\n".join(_stmt_lines(node, "")).split())
    return _expr_text(node)


def structural_equal(a: AstNode, b: AstNode) -> bool:
    """Compare kind, label, and shape, ignoring ids and line numbers."""
    if a.kind != b.kind or a.label != b.label:
        return False
    if len(a.children) != len(b.children):
        return False
    return all(structural_equal(x, y) for x, y in zip(a.children, b.children))


def ast_to_json(ast: Ast) -> dict:
    """Export the tree as nested node objects."""

    def convert(node: AstNode) -> dict:
        return {
            "id": node.id,
            "kind": node.kind,
            "label": node.label,
            "line": node.line,
            "is_statement": node.is_statement,
            "is_predicate": node.is_predicate,
            "children": [convert(c) for c in node.children],
        }

    return convert(ast.root)
