"""Human- and machine-readable summaries of a run directory."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any

from .audit import read_matrix
from .errors import ReportError

REQUIRED = ("run.json", "breakdown.csv", "matrix.csv", "pairs.csv", "duplicates.csv")
TOP_PAIRS = 20


def _read_csv(path: Path) -> list[dict[str, str]]:
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _load(run_dir: Path) -> dict[str, Any]:
    missing = [n for n in REQUIRED if not (run_dir / n).is_file()]
    if missing:
        raise ReportError(f"run directory {str(run_dir)!r} is missing {missing}")
    try:
        run = json.loads((run_dir / "run.json").read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ReportError(f"run.json is not valid JSON: {exc}") from None
    pairs = _read_csv(run_dir / "pairs.csv")
    mismatches = [p for p in pairs if p["mismatch"] == "true"]
    # stable sort keeps query order among equal similarities
    mismatches.sort(key=lambda p: -float(p["similarity"]))
    return {
        "run": run,
        "breakdown": _read_csv(run_dir / "breakdown.csv"),
        "matrix": read_matrix(run_dir / "matrix.csv"),
        "pairs": pairs,
        "top": mismatches[:TOP_PAIRS],
    }


def _md_table(header: list[str], rows: list[list[Any]]) -> list[str]:
    out = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    out += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return out


def _fmt(x: Any) -> str:
    if x is None:
        return "n/a"
    if isinstance(x, float):
        return f"{x:.4f}"
    return str(x)


def _markdown(data: dict[str, Any]) -> str:
    run, stats = data["run"], data["run"].get("stats", {})
    m = data["matrix"]
    names = list(m.schema.names)
    n = stats.get("n_records", 0)
    lines = ["# Annotation audit summary", ""]

    lines += ["## Dataset", "", f"Records: {n}", ""]
    counts = stats.get("class_counts", {})
    lines += _md_table(
        ["label", "records", "share"],
        [[k, v, f"{v / n:.4f}" if n else "0"] for k, v in counts.items()],
    )

    cfg = run.get("config", {})
    lines += ["", "## Classify-to-filter", ""]
    lines.append(
        f"Classifiers: {', '.join(run.get('classifier_ids', []))}; "
        f"{cfg.get('k_folds')}-fold cross-validation; "
        f"contentious when at least {run.get('majority_threshold')} classifiers mispredict."
    )
    lines.append("")
    lines += _md_table(
        ["label", "total", "contentious", "non-contentious", "contentious fraction"],
        [[b["label"], b["total"], b["contentious"], b["non_contentious"], b["contentious_fraction"]]
         for b in data["breakdown"]],
    )

    lines += ["", "## Inconsistency matrix", ""]
    lines.append("Rows: label of the most similar record. Columns: label of the contentious record.")
    lines.append("")
    lines += _md_table(
        ["similar \\ contentious", *names],
        [[name, *m.counts[i].tolist()] for i, name in enumerate(names)],
    )
    lines.append("")
    lines.append(
        f"Pairs: {stats.get('n_pairs', m.total)}; mismatched: {stats.get('n_mismatch', '')}; "
        f"contentious records without a neighbor: {stats.get('n_unmatched', '')}"
    )

    lines += ["", f"## Top {TOP_PAIRS} mismatched pairs by similarity", ""]
    if data["top"]:
        lines += _md_table(
            ["query", "query label", "neighbor", "neighbor label", "similarity"],
            [[p["query_id"], p["query_label"], p["neighbor_id"], p["neighbor_label"], p["similarity"]]
             for p in data["top"]],
        )
    else:
        lines.append("No mismatched pairs.")

    lines += ["", "## Duplicate texts", ""]
    lines.append(
        f"Duplicate groups ({cfg.get('duplicate_mode', 'exact')} match): {stats.get('n_duplicate_groups', 0)}; "
        f"groups with conflicting labels: {stats.get('n_conflict_groups', 0)} "
        f"(rate {_fmt(stats.get('conflict_group_rate', 0.0))}); "
        f"records in conflicting groups: {stats.get('n_records_in_conflict', 0)} "
        f"({_fmt(stats.get('conflict_record_rate', 0.0))} of the dataset)"
    )

    det = run.get("detection")
    if det:
        lines += ["", "## Injected-noise detection", ""]
        lines += _md_table(
            ["metric", "value"],
            [[k, _fmt(det[k])] for k in ("n_flipped", "n_flagged", "precision", "recall", "f1")],
        )
    return "\n".join(lines) + "\n"


def _csv(data: dict[str, Any]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["section", "key", "subkey", "value"])
    stats = data["run"].get("stats", {})
    w.writerow(["dataset", "n_records", "", stats.get("n_records", "")])
    for label, count in stats.get("class_counts", {}).items():
        w.writerow(["class_count", label, "", count])
    for b in data["breakdown"]:
        w.writerow(["breakdown", b["label"], "contentious", b["contentious"]])
        w.writerow(["breakdown", b["label"], "non_contentious", b["non_contentious"]])
        w.writerow(["breakdown", b["label"], "contentious_fraction", b["contentious_fraction"]])
    m = data["matrix"]
    for i, sim in enumerate(m.schema.names):
        for j, cont in enumerate(m.schema.names):
            w.writerow(["matrix", sim, cont, int(m.counts[i, j])])
    for p in data["top"]:
        w.writerow(["top_pair", p["query_id"], p["neighbor_id"], p["similarity"]])
    for key in ("n_pairs", "n_mismatch", "n_unmatched", "n_duplicate_groups", "n_conflict_groups",
                "n_records_in_conflict", "conflict_group_rate", "conflict_record_rate"):
        w.writerow(["stats", key, "", stats.get(key, "")])
    for key, value in (data["run"].get("detection") or {}).items():
        w.writerow(["detection", key, "", "" if value is None else value])
    return buf.getvalue()


def render_report(run_dir: str | Path, format: str = "md") -> str:
    if format not in ("md", "csv"):
        raise ReportError(f"report format must be 'md' or 'csv', got {format!r}")
    data = _load(Path(run_dir))
    return _markdown(data) if format == "md" else _csv(data)
