"""Shared fixtures: the buffer-overflow example pair and node finders."""
from __future__ import annotations

import os

# keep numeric kernels single-threaded so checkpoint bytes and timings are
# reproducible; must be set before numpy is first imported
for _var in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
             "OMP_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import pytest

from commitrisk.minic import Ast, AstNode

# The running example: a bounds check widened from CAP to 2*CAP, making
# the guarded memcpy overflowable.
BEFORE_SRC = """void copy_data() {
    char* str;
    char buf[BUF_SIZE];
    len = strlen(str);
    if (len < BUF_SIZE)
        memcpy(buf, str, len);
}
"""
AFTER_SRC = BEFORE_SRC.replace("len < BUF_SIZE", "len < 2 * BUF_SIZE")


@pytest.fixture
def overflow_pair() -> tuple[str, str]:
    return BEFORE_SRC, AFTER_SRC


def find_nodes(ast: Ast, kind: str | None = None,
               label: str | None = None) -> list[AstNode]:
    out = []
    for node in ast.root.walk():
        if kind is not None and node.kind != kind:
            continue
        if label is not None and node.label != label:
            continue
        out.append(node)
    return out


def find_one(ast: Ast, kind: str | None = None, label: str | None = None) -> AstNode:
    nodes = find_nodes(ast, kind, label)
    assert len(nodes) == 1, f"expected one {kind}/{label}, got {len(nodes)}"
    return nodes[0]
