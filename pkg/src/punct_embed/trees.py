"""Constituency trees in Penn-Treebank bracketed notation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .text import Token, is_punctuation

ROOT_LABEL = "ROOT"
DEFAULT_MAX_NODES = 256

# leaves that would otherwise collide with the bracket syntax
_ESCAPES = {"(": "-LRB-", ")": "-RRB-"}
_UNESCAPES = {v: k for k, v in _ESCAPES.items()}


class TreeParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


@dataclass
class ConstituencyTree:
    label: str
    children: list["ConstituencyTree"] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def node_count(self) -> int:
        count, stack = 0, [self]
        while stack:
            node = stack.pop()
            count += 1
            stack.extend(node.children)
        return count

    def leaves(self) -> list[str]:
        return [label for label, leaf in _preorder(self) if leaf]

    def __str__(self):
        return render_bracketed(self)


def _preorder(tree: ConstituencyTree):
    stack = [tree]
    while stack:
        node = stack.pop()
        yield node.label, node.is_leaf
        stack.extend(reversed(node.children))


def _lex(s: str):
    i, n = 0, len(s)
    while i < n:
        ch = s[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            yield ch, i
            i += 1
        else:
            j = i
            while j < n and not s[j].isspace() and s[j] not in "()":
                j += 1
            yield s[i:j], i
            i = j


def parse_bracketed(s: str) -> ConstituencyTree:
    """Parse one bracketed tree such as ``(S (NP (DT the) (NN cat)))``.

    A PTB-style unlabeled outer bracket around a single tree is unwrapped.
    """
    tokens = list(_lex(s))
    if not tokens:
        raise TreeParseError("empty tree string", 0)
    if tokens[0][0] != "(":
        raise TreeParseError(f"expected '(' but found {tokens[0][0]!r}", tokens[0][1])

    stack: list[tuple[ConstituencyTree | None, int]] = []
    root: ConstituencyTree | None = None
    pos = 0
    while pos < len(tokens):
        tok, off = tokens[pos]
        if root is not None:
            raise TreeParseError(f"unexpected content {tok!r} after the tree ended", off)
        if tok == "(":
            nxt = tokens[pos + 1] if pos + 1 < len(tokens) else None
            if nxt is None:
                raise TreeParseError("unbalanced parentheses: input ends inside a node", len(s))
            if nxt[0] == ")":
                raise TreeParseError("empty node '()'", off)
            if nxt[0] == "(":
                # unlabeled wrapper node
                stack.append((None, off))
                pos += 1
            else:
                stack.append((ConstituencyTree(nxt[0]), off))
                pos += 2
            continue
        if tok == ")":
            if not stack:
                raise TreeParseError("unbalanced parentheses: unexpected ')'", off)
            node, start = stack.pop()
            if node is None:
                raise TreeParseError("unlabeled node must wrap exactly one tree", start)
            if node.is_leaf:
                raise TreeParseError(f"node {node.label!r} has no children", start)
            finished = node
        else:
            finished = None
            if not stack or stack[-1][0] is None:
                raise TreeParseError(f"leaf {tok!r} outside a labeled node", off)
            stack[-1][0].children.append(ConstituencyTree(_UNESCAPES.get(tok, tok)))
        pos += 1
        if finished is None:
            continue
        # attach the finished node to its parent, collapsing unlabeled wrappers
        while stack and stack[-1][0] is None:
            _, wstart = stack.pop()
            if pos >= len(tokens) or tokens[pos][0] != ")":
                raise TreeParseError("unlabeled node must wrap exactly one tree", wstart)
            pos += 1
        if stack:
            stack[-1][0].children.append(finished)
        else:
            root = finished
    if stack:
        raise TreeParseError("unbalanced parentheses: input ends inside a node", len(s))
    return root


def render_bracketed(t: ConstituencyTree) -> str:
    """Canonical single-space bracketed form."""
    if t.is_leaf:
        return _ESCAPES.get(t.label, t.label)
    return "(" + " ".join([t.label] + [render_bracketed(c) for c in t.children]) + ")"


def merge_under_root(trees: Sequence[ConstituencyTree]) -> ConstituencyTree:
    """Join per-sentence trees as ordered children of one ``ROOT`` node."""
    if not trees:
        raise ValueError("merge_under_root needs at least one tree")
    return ConstituencyTree(ROOT_LABEL, list(trees))


def traverse(t: ConstituencyTree, max_nodes: int = DEFAULT_MAX_NODES) -> list[str]:
    """Pre-order node labels (leaves contribute their surface token), capped at ``max_nodes``."""
    if max_nodes < 1:
        raise ValueError("max_nodes must be at least 1")
    out = []
    for label, _ in _preorder(t):
        out.append(label)
        if len(out) == max_nodes:
            break
    return out


def flat_fallback_tree(tokens: Sequence[Token]) -> ConstituencyTree:
    """Degenerate ``ROOT -> S -> (TOK w) | (PUNCT p)`` tree for texts without a parse."""
    if not tokens:
        raise ValueError("flat_fallback_tree needs at least one token")
    pre = [
        ConstituencyTree("PUNCT" if t.is_punctuation else "TOK", [ConstituencyTree(t.surface)])
        for t in tokens
    ]
    return ConstituencyTree(ROOT_LABEL, [ConstituencyTree("S", pre)])


def prune_punctuation(t: ConstituencyTree) -> ConstituencyTree | None:
    """Drop punctuation leaves and any constituent left without children."""
    if t.is_leaf:
        return None if is_punctuation(t.label) else ConstituencyTree(t.label)
    kids = [k for k in (prune_punctuation(c) for c in t.children) if k is not None]
    return ConstituencyTree(t.label, kids) if kids else None


def lowercase_leaves(t: ConstituencyTree) -> ConstituencyTree:
    if t.is_leaf:
        return ConstituencyTree(t.label.lower())
    return ConstituencyTree(t.label, [lowercase_leaves(c) for c in t.children])
