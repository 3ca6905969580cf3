"""Independent reference implementations used by the tests."""
from __future__ import annotations

import itertools
import re
from decimal import Decimal

from qdecomp.comptree import Func, Node


def norm(text) -> str:
    """Answer key computed without the package's normalizer."""
    if isinstance(text, (int, float, Decimal)):
        d = Decimal(str(text)).quantize(Decimal("0.000001"))
        s = format(d.normalize(), "f")
        return "0" if s in ("-0", "") else s
    s = " ".join(str(text).lower().split())
    s = s.strip("".join(c for c in map(chr, range(33, 127)) if not c.isalnum()) + "‘’“”")
    if re.fullmatch(r"[+-]?(\d+(\.\d*)?|\.\d+)", s):
        return norm(Decimal(s))
    return s


def eval_tree(tree: Node, table: dict[str, dict[str, float]]) -> dict[str, float]:
    """Brute-force denotation over a plain dict fixture: {question: {answer: score}}."""
    def ask(q: str) -> dict[str, float]:
        return dict(table.get(" ".join(q.lower().split()), {}))

    if not tree.children:
        return {norm(tree.text): 0.0}
    f = tree.func
    if f is Func.SIMPQA:
        return ask(tree.children[0].text)
    if f is Func.COMP:
        template, inner = tree.children[0].text, eval_tree(tree.children[1], table)
        out: dict[str, float] = {}
        for ans in sorted(inner):
            q = re.sub(r"(?<![A-Za-z0-9_])VAR(?![A-Za-z0-9_])", ans, template, count=1)
            for a, s in ask(q).items():
                out[a] = max(out.get(a, s), s)
        return out
    if f is Func.CONJ:
        sides = []
        for c in tree.children:
            sides.append(ask(c.text) if not c.children else eval_tree(c, table))
        left, right = sides
        return {a: max(left[a], right[a]) for a in left.keys() & right.keys()}
    raise AssertionError("ADD is not generated by the oracle tests")


def conj_split_brute(a, r):
    n, m = a.shape
    best = None
    for reordered in (False, True):
        for p in range(n + 1):
            s = 0.0
            for i in range(n):
                in_first = i < p
                lo, hi = (0, r) if in_first != reordered else (r, m)
                s += max(a[i, lo:hi]) if hi > lo else 0.0
            cand = (round(s, 9), reordered, p)
            if best is None or cand[0] > best[0] + 1e-12:
                best = cand
    return best[2], best[1], best[0]


def comp_split_brute(a, r1, r2):
    n, m = a.shape
    best, arg = None, None
    for p1, p2 in itertools.combinations_with_replacement(range(n + 1), 2):
        s = 0.0
        for i in range(n):
            lo, hi = (0, r1) if i < p1 else (r1, r2) if i < p2 else (r2, m)
            s += max(a[i, lo:hi]) if hi > lo else 0.0
        if best is None or s > best + 1e-12:
            best, arg = s, (p1, p2)
    return arg
