"""Brute-force oracles shared by the graph tests and the acceptance suite.

These stay independent of the library's own traversal code: plain recursive
path enumeration and run compression over adjacency sets.
"""

import random

from arcforge.arcs import ArcDirection, assign_phases, canonical_template
from arcforge.graph import StoryEdge, StoryGraph, StoryNode, Trigger, TriggerKind

R = ArcDirection.RISE
F = ArcDirection.FALL


def oracle_paths(graph):
    succ = {}
    for e in graph.edges:
        succ.setdefault(e.src, set()).add(e.dst)
    out = []

    def rec(n, seen):
        nxt = sorted(succ.get(n, ()))
        if not nxt:
            out.append(tuple(seen))
            return
        for m in nxt:
            rec(m, seen + [m])

    rec(graph.root, [graph.root])
    return out


def oracle_arc_ok(graph, template):
    by_idx = {n.idx: n for n in graph.nodes}
    for path in oracle_paths(graph):
        labels = [by_idx[i].label for i in path]
        if any(lab is None for lab in labels):
            return False
        runs = []
        for lab in labels:
            if not runs or runs[-1] is not lab:
                runs.append(lab)
        if runs != list(template.segments):
            return False
    return True


def _talk(target):
    return Trigger(TriggerKind.TALK_TO, target, f"talk to {target}")


def random_layered_graph(rng: random.Random, kind):
    """Structurally valid random DAG (<= 12 nodes) with random or
    template-aligned labels; returns (graph, template)."""
    template = canonical_template(kind)
    segs = len(template.segments)
    n_levels = rng.randint(segs, 5)
    widths = [1] + [rng.randint(1, 3) for _ in range(n_levels - 1)]
    while sum(widths) > 12:
        widths[1 + rng.randrange(n_levels - 1)] = 1

    level_labels = assign_phases(template, n_levels).labels
    aligned = rng.random() < 0.5

    nodes = []
    ids_by_level = []
    idx = 0
    for lv, width in enumerate(widths):
        row = []
        for _ in range(width):
            lab = level_labels[lv] if aligned else rng.choice([R, F])
            nodes.append(
                StoryNode(idx=idx, label=lab, storyline=f"beat {idx}", goal="", level_index=lv)
            )
            row.append(idx)
            idx += 1
        ids_by_level.append(row)

    edges = []
    for lv in range(n_levels - 1):
        src_row, dst_row = ids_by_level[lv], ids_by_level[lv + 1]
        for i, d in enumerate(dst_row):
            edges.append(StoryEdge(rng.choice(src_row), d, _talk(f"t{lv}:{i}")))
        for s in src_row:
            if not any(e.src == s for e in edges):
                edges.append(StoryEdge(s, rng.choice(dst_row), _talk(f"x{s}")))
    return StoryGraph(tuple(nodes), tuple(edges), root=0, arc=kind), template
