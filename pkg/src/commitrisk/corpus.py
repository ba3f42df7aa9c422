"""On-disk commit corpus, line blame, dependency-aware mining of
vulnerability-contributing commits, labeling, and dataset splits.

The corpus is a directory with a manifest.json holding an ordered commit
array; file snapshots are inline strings or {"blob": <name>} references into
blobs/.  Line alignment everywhere is exact-text LCS, so blame is a
deterministic function of the snapshots.
"""
from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from commitrisk.ctg import _lcs_pairs, ctg_from_sources, union_ctgs
from commitrisk.graphs import build_rcg
from commitrisk.minic import LexError, ParseError, parse_source

log = logging.getLogger(__name__)


class CorpusFormatError(ValueError):
    pass


class LineOutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class FileChange:
    before: str | None  # None: file created by this commit
    after: str | None   # None: file deleted by this commit


@dataclass(frozen=True)
class CommitRecord:
    id: str
    parent: str | None
    timestamp: int
    project: str
    files: dict[str, FileChange]
    message: str = ""
    fixes: str | None = None  # vulnerability id this commit fixes


@dataclass(frozen=True)
class LabeledCommit:
    id: str
    label: str  # dangerous | safe | unlabeled
    timestamp: int
    project: str
    evidence: dict = field(default_factory=dict, compare=False)


class CommitCorpus:
    def __init__(self, commits: list[CommitRecord]):
        self.commits = commits
        self.by_id = {c.id: c for c in commits}
        self._validate()

    def _validate(self) -> None:
        seen = set()
        for rec in self.commits:
            if rec.id in seen:
                raise CorpusFormatError(f"duplicate commit id {rec.id!r}")
            seen.add(rec.id)
            if rec.parent is not None:
                if rec.parent not in seen:
                    raise CorpusFormatError(
                        f"commit {rec.id!r}: parent {rec.parent!r} must "
                        "appear earlier in the manifest")
                parent = self.by_id[rec.parent]
                if rec.timestamp <= parent.timestamp:
                    raise CorpusFormatError(
                        f"commit {rec.id!r}: timestamp does not increase "
                        f"over parent {rec.parent!r}")
            for path, change in rec.files.items():
                inherited = (self.file_at(rec.parent, path)
                             if rec.parent is not None else None)
                if change.before != inherited:
                    raise CorpusFormatError(
                        f"commit {rec.id!r}: before-snapshot of {path!r} "
                        "does not match the parent state")

    def record(self, commit_id: str) -> CommitRecord:
        try:
            return self.by_id[commit_id]
        except KeyError:
            raise CorpusFormatError(f"unknown commit id {commit_id!r}") from None

    def chain(self, commit_id: str) -> list[CommitRecord]:
        """Commit and its ancestors, newest first."""
        out = []
        cur: str | None = commit_id
        while cur is not None:
            rec = self.record(cur)
            out.append(rec)
            cur = rec.parent
        return out

    def file_at(self, commit_id: str, path: str) -> str | None:
        """Full content of path as of commit_id, or None if absent."""
        for rec in self.chain(commit_id):
            if path in rec.files:
                return rec.files[path].after
        return None


def _resolve_snapshot(value, root: Path, commit_id: str):
    if value is None or isinstance(value, str):
        return value
    if isinstance(value, dict) and set(value) == {"blob"}:
        blob = root / "blobs" / value["blob"]
        if not blob.is_file():
            raise CorpusFormatError(
                f"commit {commit_id!r}: missing blob {value['blob']!r}")
        return blob.read_text(encoding="utf-8")
    raise CorpusFormatError(f"commit {commit_id!r}: bad file snapshot {value!r}")


def load_corpus(path) -> CommitCorpus:
    root = Path(path)
    manifest = root / "manifest.json" if root.is_dir() else root
    if not manifest.is_file():
        raise CorpusFormatError(f"no manifest at {manifest}")
    root = manifest.parent
    try:
        doc = json.loads(manifest.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("commits"), list):
        raise CorpusFormatError('manifest must be {"commits": [...]}')
    commits = []
    for entry in doc["commits"]:
        cid = entry.get("id")
        if not isinstance(cid, str) or not cid:
            raise CorpusFormatError(f"commit with bad id: {entry!r}")
        for key in ("timestamp", "project"):
            if key not in entry:
                raise CorpusFormatError(f"commit {cid!r}: missing {key!r}")
        files = {}
        for fpath, change in entry.get("files", {}).items():
            if not isinstance(change, dict):
                raise CorpusFormatError(f"commit {cid!r}: bad change for {fpath!r}")
            files[fpath] = FileChange(
                before=_resolve_snapshot(change.get("before"), root, cid),
                after=_resolve_snapshot(change.get("after"), root, cid))
        commits.append(CommitRecord(
            id=cid,
            parent=entry.get("parent"),
            timestamp=int(entry["timestamp"]),
            project=str(entry["project"]),
            files=files,
            message=entry.get("message", ""),
            fixes=entry.get("fixes")))
    return CommitCorpus(commits)


def _lines(text: str) -> list[str]:
    return text.splitlines()


def diff_lines(before: str, after: str):
    """(matched pairs of 0-based indices, deleted 1-based before lines,
    added 1-based after lines) under exact-text LCS alignment."""
    b, a = _lines(before), _lines(after)
    pairs = _lcs_pairs(b, a)
    kept_b = {i for i, _ in pairs}
    kept_a = {j for _, j in pairs}
    deleted = [i + 1 for i in range(len(b)) if i not in kept_b]
    added = [j + 1 for j in range(len(a)) if j not in kept_a]
    return pairs, deleted, added


def blame(corpus: CommitCorpus, path: str, line: int, at: str) -> str:
    """The most recent commit at or before `at` that introduced or last
    modified the given line (1-based in the file content as of `at`)."""
    content = corpus.file_at(at, path)
    if content is None:
        raise LineOutOfRange(f"{path!r} does not exist at commit {at!r}")
    if not 1 <= line <= len(_lines(content)):
        raise LineOutOfRange(f"line {line} out of range for {path!r} at {at!r}")
    current = line
    for rec in corpus.chain(at):
        if path not in rec.files:
            continue
        change = rec.files[path]
        if change.before is None:
            return rec.id
        pairs, _, _ = diff_lines(change.before, change.after or "")
        survived = {j + 1: i + 1 for i, j in pairs}
        if current not in survived:
            return rec.id
        current = survived[current]
    raise LineOutOfRange(f"{path!r} has no introducing commit for line {line}")


def _added_line_neighbors(after_src: str, added: set[int], hops: int) -> set[int]:
    """Lines of statements dependency-connected (within `hops`, either
    direction) to statements starting on an added line, in the after-version."""
    ast = parse_source(after_src)
    rcg = build_rcg(ast)
    node_line = {n.id: n.line for n in rcg.nodes}
    flow_nodes = {n.id for n in rcg.nodes if n.is_statement or n.is_predicate}
    adjacency: dict[int, set[int]] = {}
    for e in rcg.edges:
        if e.relation.cls != "dependency":
            continue
        adjacency.setdefault(e.src, set()).add(e.dst)
        adjacency.setdefault(e.dst, set()).add(e.src)
    seeds = {nid for nid in flow_nodes if node_line[nid] in added}
    frontier = set(seeds)
    reached = set(seeds)
    for _ in range(hops):
        frontier = {nxt for nid in frontier
                    for nxt in adjacency.get(nid, ()) if nxt not in reached}
        reached |= frontier
    return {node_line[nid] for nid in reached - seeds}


def mine_vccs(corpus: CommitCorpus, fixing: CommitRecord, hops: int = 1) -> set:
    """VCC set for a fixing commit: blame every deleted line, plus the
    unchanged statements dependency-connected to each added line.

    Returns {(vulnerability id, blamed commit id, frozenset of (path, line))}
    with line numbers in the fixing commit's parent version.
    """
    if fixing.fixes is None:
        raise ValueError(f"commit {fixing.id!r} is not a fixing commit")
    if fixing.parent is None:
        return set()
    blamed: dict[str, set] = {}

    def blame_line(path: str, before_line: int) -> None:
        culprit = blame(corpus, path, before_line, fixing.parent)
        blamed.setdefault(culprit, set()).add((path, before_line))

    for path, change in sorted(fixing.files.items()):
        before = change.before or ""
        after = change.after or ""
        pairs, deleted, added = diff_lines(before, after)
        for line in deleted:
            blame_line(path, line)
        if not added or change.before is None:
            continue
        try:
            neighbor_lines = _added_line_neighbors(after, set(added), hops)
        except (LexError, ParseError) as exc:
            log.warning("commit %s: %s does not parse (%s); "
                        "blaming deleted lines only", fixing.id, path, exc)
            continue
        back = {j + 1: i + 1 for i, j in pairs}
        for after_line in sorted(neighbor_lines):
            if after_line in back:  # unchanged statements only
                blame_line(path, back[after_line])
    return {(fixing.fixes, cid, frozenset(lines))
            for cid, lines in blamed.items()}


def label_dataset(corpus: CommitCorpus, hops: int = 1) -> list[LabeledCommit]:
    """Per vulnerability, the latest contributing commit is dangerous; fixing
    commits contributing to no vulnerability are safe; the rest unlabeled."""
    vcc_by_vuln: dict[str, dict[str, set]] = {}
    all_vcc_ids = set()
    for rec in corpus.commits:
        if rec.fixes is None:
            continue
        for vuln, cid, lines in mine_vccs(corpus, rec, hops=hops):
            vcc_by_vuln.setdefault(vuln, {}).setdefault(cid, set()).update(lines)
            all_vcc_ids.add(cid)
    dangerous: dict[str, list] = {}
    for vuln in sorted(vcc_by_vuln):
        culprits = vcc_by_vuln[vuln]
        trigger = max(culprits, key=lambda cid: (corpus.record(cid).timestamp, cid))
        dangerous.setdefault(trigger, []).append({
            "id": vuln,
            "lines": sorted([path, line] for path, line in culprits[trigger]),
        })
    labeled = []
    for rec in corpus.commits:
        if rec.id in dangerous:
            label, evidence = "dangerous", {"vulnerabilities": dangerous[rec.id]}
        elif rec.fixes is not None and rec.id not in all_vcc_ids:
            label, evidence = "safe", {"fixes": rec.fixes}
        else:
            label, evidence = "unlabeled", {}
        labeled.append(LabeledCommit(rec.id, label, rec.timestamp,
                                     rec.project, evidence))
    return labeled


def split_dev_process(labeled: list[LabeledCommit], ratio: float = 0.8):
    """Time-ordered split: earliest ceil(ratio*n) commits train, rest test."""
    ordered = sorted(labeled, key=lambda c: (c.timestamp, c.id))
    cut = math.ceil(round(ratio * len(ordered), 9))
    return ordered[:cut], ordered[cut:]


def split_cross_project(labeled: list[LabeledCommit], ratio: float = 0.8,
                        seed: int = 0):
    """Project-disjoint split: a seeded shuffle of project ids, ratio of the
    projects on the train side."""
    projects = sorted({c.project for c in labeled})
    random.Random(seed).shuffle(projects)
    cut = math.ceil(round(ratio * len(projects), 9))
    train_projects = set(projects[:cut])
    train = [c for c in labeled if c.project in train_projects]
    test = [c for c in labeled if c.project not in train_projects]
    return train, test


def labels_to_json(labeled: list[LabeledCommit]) -> dict:
    return {"labels": [{"id": c.id, "label": c.label, "timestamp": c.timestamp,
                        "project": c.project, "evidence": c.evidence}
                       for c in sorted(labeled, key=lambda c: c.id)]}


def labels_from_json(doc: dict) -> list[LabeledCommit]:
    if not isinstance(doc, dict) or not isinstance(doc.get("labels"), list):
        raise CorpusFormatError('labels document must be {"labels": [...]}')
    return [LabeledCommit(e["id"], e["label"], e["timestamp"], e["project"],
                          e.get("evidence", {}))
            for e in doc["labels"]]


def commit_ctg(record: CommitRecord, trim: bool = True,
               hop_limit: int | None = None):
    """Change graph of a commit: the union over its parseable changed files.

    Files that fail to parse are skipped with a warning; a commit with no
    parseable changed file yields an empty graph.
    """
    parts = []
    for path in sorted(record.files):
        change = record.files[path]
        before = change.before or ""
        after = change.after or ""
        try:
            parts.append(ctg_from_sources(before, after, trim=trim,
                                          hop_limit=hop_limit))
        except (LexError, ParseError) as exc:
            log.warning("commit %s: skipping %s (%s)", record.id, path, exc)
    return union_ctgs(parts)
