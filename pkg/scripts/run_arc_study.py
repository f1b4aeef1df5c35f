#!/usr/bin/env python3
"""Multi-arc valence study: N stories per arc, scored and shape-checked.

For each of the six arcs, generates and finalizes N seeded stories with the
deterministic template backend, scores every node with the bundled lexicon
scorer, and reports whether each arc's mean trajectory matches its template
segment directions. Writes a JSON report and a long-format CSV (and a plot
grid with --plot).

Usage:
    python3 scripts/run_arc_study.py --runs 10 --nodes 7 --out-dir study_out --plot
"""

import argparse
import json
from pathlib import Path

from arcforge.arcs import ArcKind, canonical_template
from arcforge.backends import TemplateBackend
from arcforge.graph import linearize
from arcforge.pipeline import GenerationRequest, finalize_chain, generate_skeleton
from arcforge.valence import (
    LexiconScorer,
    build_analysis_report,
    mean_trajectory,
    story_trajectory,
    trajectories_to_csv,
)

DEFAULT_PROMPT = "a ranger escorts a caravan through the hollow hills to the coast"


def run_study(prompt: str, runs: int, nodes: int, base_seed: int) -> dict:
    scorer = LexiconScorer()
    results = {}
    for arc_i, arc in enumerate(k for k in ArcKind if k is not ArcKind.NONE):
        req = GenerationRequest(prompt=prompt, arc=arc, node_budget=nodes)
        template = canonical_template(arc)
        trajectories = []
        for run in range(runs):
            backend = TemplateBackend(seed=base_seed + 1000 * arc_i + run)
            graph = generate_skeleton(req, backend)
            final = finalize_chain(req, graph, backend)
            trajectories.append(story_trajectory(linearize(final.graph), scorer))
        results[arc.value] = {
            "report": build_analysis_report(arc.value, trajectories, template, scorer.name),
            "trajectories": trajectories,
        }
    return results


def plot_study(results: dict, out_path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(2, 3, figsize=(14, 7), sharey=True)
    for ax, (arc, data) in zip(axes.flat, results.items()):
        trajectories = data["trajectories"]
        xs = range(1, len(trajectories[0].values) + 1)
        for t in trajectories:
            ax.plot(xs, t.values, color="grey", linestyle="--", alpha=0.4, linewidth=1)
        mean = mean_trajectory(trajectories)
        ax.plot(xs, mean.values, linewidth=2.5)
        matched = data["report"]["shape"]["matched"]
        ax.set_title(f"{arc} ({'matched' if matched else 'mismatch'})")
        ax.set_xlabel("level index")
        ax.axhline(0.0, color="black", linewidth=0.5)
    axes.flat[0].set_ylabel("composite valence")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    print(f"wrote {out_path}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--prompt", default=DEFAULT_PROMPT)
    parser.add_argument("--runs", type=int, default=10)
    parser.add_argument("--nodes", type=int, default=7)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", default="study_out")
    parser.add_argument("--plot", action="store_true", help="also write a PNG grid")
    args = parser.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    results = run_study(args.prompt, args.runs, args.nodes, args.seed)

    all_matched = True
    csv_parts = []
    report_doc = {}
    for arc, data in results.items():
        report = data["report"]
        report_doc[arc] = report
        matched = report["shape"]["matched"]
        all_matched &= matched
        slopes = ", ".join(f"{s:+.4f}" for s in report["shape"]["per_segment_slopes"])
        print(f"{arc:15s} mean-shape {'MATCHED' if matched else 'MISMATCH'}  slopes: {slopes}")
        csv_parts.append(trajectories_to_csv(arc, data["trajectories"]))

    (out_dir / "arc_study.json").write_text(
        json.dumps(report_doc, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    header, *_ = csv_parts[0].splitlines()
    rows = [header]
    for part in csv_parts:
        rows.extend(part.strip().splitlines()[1:])
    (out_dir / "arc_study.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    print(f"wrote {out_dir / 'arc_study.json'} and {out_dir / 'arc_study.csv'}")

    if args.plot:
        plot_study(results, out_dir / "arc_study.png")
    return 0 if all_matched else 2


if __name__ == "__main__":
    raise SystemExit(main())
