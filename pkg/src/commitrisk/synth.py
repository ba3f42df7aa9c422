"""Synthetic MiniC programs, commits, and a planted-mutation benchmark.

The generator serves two jobs: random programs/edits for property tests
(trimming and dataflow oracles), and a labeled benchmark of dangerous
vs. safe edits for end-to-end training. Dangerous edits widen a bounds
check, drop a release call, or strip a guard; safe edits are equivalent
rewrites or guard additions. Every commit records which statement was
mutated so localization can be scored.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .minic import parse_source

_FN_NAMES = ["copy_data", "handle_req", "read_frame", "fill_cache", "sync_state",
             "pack_msg", "update_row", "load_entry", "merge_span", "emit_block"]
_BUF_NAMES = ["buf", "dst", "out", "tmp"]
_SRC_NAMES = ["src", "str", "input", "data"]
_LEN_NAMES = ["len", "n", "size", "count"]
_CAP_NAMES = ["BUF_SIZE", "MAX_LEN", "LIMIT", "CAP"]
_HANDLE_NAMES = ["h", "fd", "conn", "res"]
_VAR_POOL = ["a", "b", "c", "u", "v", "w", "x", "y", "z", "t"]
_OPS = ["+", "-", "*"]

DANGEROUS_KINDS = ("widen-bound", "drop-release", "drop-guard")
SAFE_KINDS = ("rewrite-double", "split-temp", "add-guard")


@dataclass
class SynthCommit:
    project: str
    kind: str
    label: str  # dangerous | safe
    before: str
    after: str
    # 1-based line of the mutated statement in each version (None if absent)
    line_old: int | None
    line_new: int | None


def _render(fn_name: str, body_lines: list[str]) -> str:
    lines = [f"void {fn_name}() {{"]
    lines.extend(f"    {line}" if line else "" for line in body_lines)
    lines.append("}")
    return "\n".join(lines) + "\n"


def _filler_lines(rng: random.Random, names: list[str], count: int) -> list[str]:
    """Declarations then a chain of assignments over a private variable pool."""
    lines = [f"int {v} = {rng.randrange(100)};" for v in names]
    for _ in range(count):
        dst = rng.choice(names)
        lhs = rng.choice(names)
        rhs = rng.choice(names + [str(rng.randrange(100))])
        lines.append(f"{dst} = {lhs} {rng.choice(_OPS)} {rhs};")
    return lines


def _pick_vars(rng: random.Random, k: int) -> list[str]:
    return rng.sample(_VAR_POOL, k)


def _copy_pattern(rng: random.Random, guarded: bool) -> tuple[list[str], int]:
    """The strlen/bounds-check/memcpy idiom; returns (lines, guard index or -1)."""
    buf = rng.choice(_BUF_NAMES)
    src = rng.choice(_SRC_NAMES)
    length = rng.choice(_LEN_NAMES)
    cap = rng.choice(_CAP_NAMES)
    lines = [
        f"char {buf}[{cap}];",
        f"char* {src};",
        f"{length} = strlen({src});",
    ]
    if guarded:
        guard_at = len(lines)
        lines.append(f"if ({length} < {cap})")
        lines.append(f"    memcpy({buf}, {src}, {length});")
        return lines, guard_at
    lines.append(f"memcpy({buf}, {src}, {length});")
    return lines, -1


def _release_pattern(rng: random.Random) -> tuple[list[str], int]:
    """Acquire/use/release chain; returns (lines, release index)."""
    handle = rng.choice(_HANDLE_NAMES)
    size = rng.choice(_LEN_NAMES)
    lines = [
        f"int {handle};",
        f"int {size} = {rng.randrange(1, 100)};",
        f"read_into(&{handle}, {size});",
        f"process({handle});",
        f"release({handle});",
    ]
    return lines, len(lines) - 1


def _guard_pattern(rng: random.Random, names: list[str]) -> tuple[list[str], int]:
    """A guarded update feeding a sink; returns (lines, guard index)."""
    v, x = names[0], names[1]
    cap = rng.choice(_CAP_NAMES)
    lines = [
        f"int {v} = {rng.randrange(100)};",
        f"int {x} = 0;",
        f"if ({v} < {cap})",
        f"    {x} = {v} + {rng.randrange(1, 20)};",
        f"consume({x});",
    ]
    return lines, 2


def make_commit(rng: random.Random, project: str, kind: str) -> SynthCommit:
    """One before/after pair with a single planted edit of the given kind."""
    fn_name = rng.choice(_FN_NAMES)
    filler_vars = _pick_vars(rng, rng.randrange(2, 5))
    head = _filler_lines(rng, filler_vars, rng.randrange(1, 4))
    tail = _filler_lines(rng, _pick_vars(rng, 2), rng.randrange(0, 3))

    if kind == "widen-bound":
        pattern, guard_at = _copy_pattern(rng, guarded=True)
        before_body = head + pattern + tail
        idx = len(head) + guard_at
        factor = rng.choice([2, 4])
        after_body = list(before_body)
        cond = before_body[idx][len("if ("):-1]
        lhs, rhs = cond.split(" < ")
        after_body[idx] = f"if ({lhs} < {factor} * {rhs})"
        line = idx + 2  # +1 for the function header, +1 for 1-based
        return SynthCommit(project, kind, "dangerous",
                           _render(fn_name, before_body),
                           _render(fn_name, after_body), line, line)

    if kind == "drop-release":
        pattern, release_at = _release_pattern(rng)
        before_body = head + pattern + tail
        idx = len(head) + release_at
        after_body = before_body[:idx] + before_body[idx + 1:]
        return SynthCommit(project, kind, "dangerous",
                           _render(fn_name, before_body),
                           _render(fn_name, after_body), idx + 2, None)

    if kind == "drop-guard":
        pattern, guard_at = _guard_pattern(rng, _pick_vars(rng, 2))
        before_body = head + pattern + tail
        idx = len(head) + guard_at
        after_body = list(before_body)
        after_body[idx:idx + 2] = [before_body[idx + 1].strip()]
        return SynthCommit(project, kind, "dangerous",
                           _render(fn_name, before_body),
                           _render(fn_name, after_body), idx + 2, idx + 2)

    if kind == "rewrite-double":
        x, y = _pick_vars(rng, 2)
        planted = f"{x} = {y} + {y};"
        body = head + [f"int {y} = {rng.randrange(100)};", planted] + tail
        idx = len(head) + 1
        after_body = list(body)
        after_body[idx] = f"{x} = 2 * {y};"
        return SynthCommit(project, kind, "safe",
                           _render(fn_name, body),
                           _render(fn_name, after_body), idx + 2, idx + 2)

    if kind == "split-temp":
        x, y, z = _pick_vars(rng, 3)
        planted = f"{x} = {y} + {z};"
        body = head + [f"int {y} = {rng.randrange(100)};",
                       f"int {z} = {rng.randrange(100)};", planted] + tail
        idx = len(head) + 2
        after_body = body[:idx] + [f"int t9 = {y} + {z};", f"{x} = t9;"] + body[idx + 1:]
        return SynthCommit(project, kind, "safe",
                           _render(fn_name, body),
                           _render(fn_name, after_body), idx + 2, idx + 2)

    if kind == "add-guard":
        pattern, _ = _copy_pattern(rng, guarded=False)
        before_body = head + pattern + tail
        idx = len(head) + len(pattern) - 1  # the memcpy line
        memcpy_line = before_body[idx]
        length = memcpy_line[:-2].rsplit(" ", 1)[-1]
        cap = rng.choice(_CAP_NAMES)
        after_body = (before_body[:idx]
                      + [f"if ({length} < {cap})", f"    {memcpy_line}"]
                      + before_body[idx + 1:])
        return SynthCommit(project, kind, "safe",
                           _render(fn_name, before_body),
                           _render(fn_name, after_body), idx + 2, idx + 2)

    raise ValueError(f"unknown mutation kind: {kind}")


def generate_benchmark(n_train: int = 400, n_test: int = 100,
                       commits_per_project: int = 5,
                       seed: int = 0) -> tuple[list[SynthCommit], list[SynthCommit]]:
    """Project-disjoint train/test commit lists with planted labels."""
    rng = random.Random(seed)
    n_projects = (n_train + n_test) // commits_per_project
    n_train_projects = n_train // commits_per_project
    projects = [f"proj{p:03d}" for p in range(n_projects)]
    rng.shuffle(projects)
    kinds = list(DANGEROUS_KINDS + SAFE_KINDS)

    def build(project_list: list[str]) -> list[SynthCommit]:
        commits = []
        for project in project_list:
            for _ in range(commits_per_project):
                kind = rng.choice(kinds)
                commit = make_commit(rng, project, kind)
                parse_source(commit.before)  # generator must emit valid MiniC
                parse_source(commit.after)
                commits.append(commit)
        return commits

    return build(projects[:n_train_projects]), build(projects[n_train_projects:])


# --- random programs for property tests ---

def random_acyclic_function(rng: random.Random, max_statements: int = 12) -> str:
    """A random function without loops, for path-enumeration oracles."""
    names = rng.sample(_VAR_POOL, 4)
    budget = rng.randrange(3, max_statements + 1)
    lines: list[str] = []

    def emit(indent: int, remaining: int) -> int:
        used = 0
        while used < remaining:
            pad = "    " * indent
            roll = rng.random()
            if roll < 0.25 and remaining - used >= 2 and indent < 2:
                cond_v = rng.choice(names)
                lines.append(f"{pad}if ({cond_v} < {rng.randrange(50)}) {{")
                used += 1 + emit(indent + 1, (remaining - used - 1) // 2 or 1)
                lines.append(f"{pad}}}")
                if rng.random() < 0.4 and used < remaining:
                    lines.append(f"{pad}else {{")
                    used += emit(indent + 1, (remaining - used) // 2 or 1)
                    lines.append(f"{pad}}}")
            elif roll < 0.35:
                v = rng.choice(names)
                lines.append(f"{'    ' * indent}int {v} = {rng.randrange(10)};")
                used += 1
            elif roll < 0.45:
                v = rng.choice(names)
                lines.append(f"{'    ' * indent}read_into(&{v}, {rng.randrange(9)});")
                used += 1
            elif roll < 0.5 and indent > 0:
                lines.append(f"{'    ' * indent}return;")
                used += 1
                break
            else:
                dst = rng.choice(names)
                lhs = rng.choice(names)
                rhs = rng.choice(names + [str(rng.randrange(10))])
                lines.append(f"{'    ' * indent}{dst} = {lhs} {rng.choice(_OPS)} {rhs};")
                used += 1
        return used

    emit(1, budget)
    return "void f() {\n" + "\n".join(lines) + "\n}\n"


def random_looping_function(rng: random.Random) -> str:
    """A random function with a while loop, for fixpoint oracles."""
    names = rng.sample(_VAR_POOL, 3)
    a, b, c = names
    pre = [f"int {a} = {rng.randrange(10)};", f"int {b} = 0;"]
    body = [f"    {b} = {b} + {a};", f"    {a} = {a} - 1;"]
    if rng.random() < 0.5:
        body.append(f"    if ({b} > {rng.randrange(50)})")
        body.append(f"        {c} = {b} * 2;")
    post = [f"{c} = {a} + {b};"]
    lines = pre + [f"while ({a} > 0) {{"] + body + ["}"] + post
    return "void f() {\n" + "\n".join(f"    {l}" for l in lines) + "\n}\n"


def random_program(rng: random.Random) -> list[str]:
    """A random multi-pattern program as a list of body segments.

    Each segment is one or two already-indented lines (guards keep their
    body attached) so segment-level edits always stay parseable.
    """
    segments: list[str] = []
    for line in _filler_lines(rng, _pick_vars(rng, rng.randrange(2, 4)),
                              rng.randrange(1, 4)):
        segments.append(line)
    roll = rng.random()
    if roll < 0.4:
        lines, guard_at = _copy_pattern(rng, guarded=rng.random() < 0.7)
        if guard_at >= 0:
            segments.extend(lines[:guard_at])
            segments.append(lines[guard_at] + "\n" + lines[guard_at + 1])
        else:
            segments.extend(lines)
    elif roll < 0.7:
        lines, _ = _release_pattern(rng)
        segments.extend(lines)
    else:
        lines, guard_at = _guard_pattern(rng, _pick_vars(rng, 2))
        segments.extend(lines[:guard_at])
        segments.append(lines[guard_at] + "\n" + lines[guard_at + 1])
        segments.extend(lines[guard_at + 2:])
    return segments


def random_commit_pair(rng: random.Random) -> tuple[str, str]:
    """A random before/after pair for trimming property tests."""
    segments = random_program(rng)
    edited = list(segments)
    for _ in range(rng.randrange(0, 3)):
        if not edited:
            break
        op = rng.randrange(4)
        idx = rng.randrange(len(edited))
        if op == 0:
            edited.pop(idx)
        elif op == 1:
            edited.insert(idx, f"{rng.choice(_VAR_POOL)} = {rng.randrange(100)};")
        elif op == 2 and any(ch.isdigit() for ch in edited[idx]):
            digits = "".join(ch for ch in edited[idx] if ch.isdigit())
            edited[idx] = edited[idx].replace(digits[0], str(rng.randrange(10)), 1)
        else:
            edited[idx], edited[(idx + 1) % len(edited)] = (
                edited[(idx + 1) % len(edited)], edited[idx])
    fn_name = rng.choice(_FN_NAMES)
    before = _render(fn_name, [s for seg in segments for s in seg.split("\n")])
    after = _render(fn_name, [s for seg in edited for s in seg.split("\n")])
    return before, after


def write_benchmark_corpus(out_dir, n_train: int = 400, n_test: int = 100,
                           commits_per_project: int = 5, seed: int = 0):
    """Write the planted-mutation benchmark as an on-disk corpus.

    Each synthetic commit becomes a two-commit chain: a base commit creating
    the file, then the edit. labels.json carries the planted labels (mining
    has nothing to work with here; the labels are known by construction).
    """
    import json
    from pathlib import Path

    from .corpus import LabeledCommit, labels_to_json

    train, test = generate_benchmark(n_train, n_test, commits_per_project, seed)
    entries = []
    labeled = []
    tick = 0
    for split, commits in (("train", train), ("test", test)):
        for i, commit in enumerate(commits):
            path = f"{commit.project}/case{i:03d}.c"
            base_id = f"{commit.project}-{i:03d}-base"
            edit_id = f"{commit.project}-{i:03d}"
            entries.append({
                "id": base_id, "parent": None, "timestamp": tick,
                "project": commit.project, "message": "initial import",
                "files": {path: {"before": None, "after": commit.before}},
            })
            entries.append({
                "id": edit_id, "parent": base_id, "timestamp": tick + 1,
                "project": commit.project, "message": commit.kind,
                "files": {path: {"before": commit.before,
                                 "after": commit.after}},
            })
            labeled.append(LabeledCommit(
                edit_id, commit.label, tick + 1, commit.project,
                {"kind": commit.kind, "split": split,
                 "line_old": commit.line_old, "line_new": commit.line_new}))
            tick += 2
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump({"commits": entries}, fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(root / "labels.json", "w", encoding="utf-8") as fh:
        json.dump(labels_to_json(labeled), fh, sort_keys=True, indent=2)
        fh.write("\n")
    return root / "manifest.json"
