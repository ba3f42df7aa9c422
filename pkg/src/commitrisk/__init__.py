"""Commit-level vulnerability screening over code-change graphs.

The pipeline: parse two versions of a C-like source file, build a
relational code graph for each, merge them into a single change graph,
trim it down to the parts affected by the change, classify it with a
relational graph network, and point back at suspicious statements.
"""

__version__ = "0.1.0"
