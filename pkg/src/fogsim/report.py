"""Result persistence and comparison reports.

Results are written as four CSV files (placements.csv, timeseries.csv,
requests.csv, evictions.csv) plus a human-readable summary.txt.  The report
command recomputes every summary number from the CSVs alone.
"""

from __future__ import annotations

import csv
from collections import Counter, defaultdict
from pathlib import Path

import numpy as np

from .simulator import ResultSet

CSV_FILES = {
    "placements": ResultSet.PLACEMENT_FIELDS,
    "timeseries": ResultSet.TIMESERIES_FIELDS,
    "requests": ResultSet.REQUEST_FIELDS,
    "evictions": ResultSet.EVICTION_FIELDS,
}


def write_results(results: ResultSet, outdir) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for stem, fields in CSV_FILES.items():
        path = outdir / f"{stem}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(fields)
            writer.writerows(getattr(results, stem))
        written.append(path)
    summary = outdir / "summary.txt"
    summary.write_text(render_summary(load_results(outdir),
                                      header=f"scenario: {results.scenario}  "
                                             f"seed: {results.seed}  "
                                             f"profile: {results.profile}"))
    written.append(summary)
    return written


def load_results(directory) -> dict[str, list[dict]]:
    directory = Path(directory)
    loaded = {}
    for stem in CSV_FILES:
        path = directory / f"{stem}.csv"
        if not path.exists():
            raise FileNotFoundError(f"missing {path.name} in {directory}")
        with open(path, newline="") as fh:
            loaded[stem] = list(csv.DictReader(fh))
    return loaded


def arms_in(rows: dict[str, list[dict]]) -> list[str]:
    seen = []
    for table in rows.values():
        for row in table:
            if row["arm"] not in seen:
                seen.append(row["arm"])
    return seen


def allocation_histogram(placements: list[dict], arm: str) -> dict[str, Counter]:
    """Per-node placement counts for one arm: total, and RT vs regular is
    not derivable here, so the caller gets per-service counts instead."""
    by_node = defaultdict(Counter)
    for row in placements:
        if row["arm"] != arm or row["status"] != "Running":
            continue
        by_node[row["node"]][row["service"]] += 1
    return dict(by_node)


def unschedulable_count(placements: list[dict], arm: str) -> int:
    return sum(1 for row in placements
               if row["arm"] == arm and row["status"] == "Unschedulable")


def rtt_values(requests: list[dict], arm: str) -> np.ndarray:
    return np.array([float(r["rtt_ms"]) for r in requests if r["arm"] == arm])


def rtt_cdf(values: np.ndarray, step: float = 0.01) -> list[tuple[float, float]]:
    """(quantile, rtt) points on a regular quantile grid."""
    if values.size == 0:
        return []
    qs = np.arange(step, 1.0 + step / 2, step)
    return list(zip(qs.tolist(), np.quantile(values, qs).tolist()))


def replica_request_counts(requests: list[dict], arm: str) -> Counter:
    return Counter(r["replica"] for r in requests if r["arm"] == arm)


def convergence_time(timeseries: list[dict], arm: str, rep: int) -> float | None:
    """Earliest sample time after which no node's allocation changes again.

    Returns None when the run has no samples for that (arm, rep).
    """
    per_time = defaultdict(dict)
    for row in timeseries:
        if row["arm"] != arm or int(row["rep"]) != rep:
            continue
        per_time[float(row["t"])][row["node"]] = (row["rt_pods"], row["regular_pods"])
    if not per_time:
        return None
    times = sorted(per_time)
    final = per_time[times[-1]]
    converged_at = times[-1]
    for t in reversed(times):
        if per_time[t] != final:
            break
        converged_at = t
    return converged_at


def eviction_counts(evictions: list[dict], arm: str) -> Counter:
    return Counter(row["reason"] for row in evictions if row["arm"] == arm)


def _format_histogram(hist: dict[str, Counter]) -> list[str]:
    lines = []
    for node in sorted(hist):
        parts = ", ".join(f"{svc}={n}" for svc, n in sorted(hist[node].items()))
        lines.append(f"    {node}: total={sum(hist[node].values())} ({parts})")
    return lines


def render_summary(rows: dict[str, list[dict]], header: str = "") -> str:
    lines = []
    if header:
        lines.append(header)
    arms = arms_in(rows)
    reps = sorted({int(r["rep"]) for r in rows["placements"]}) or [0]
    lines.append(f"arms: {', '.join(arms)}  repetitions: {len(reps)}")
    for arm in arms:
        lines.append("")
        lines.append(f"== arm {arm} ==")
        hist = allocation_histogram(rows["placements"], arm)
        if hist:
            lines.append("  placements per node (all repetitions):")
            lines.extend(_format_histogram(hist))
        uns = unschedulable_count(rows["placements"], arm)
        if uns:
            lines.append(f"  unschedulable placements: {uns}")
        ev = eviction_counts(rows["evictions"], arm)
        if ev:
            lines.append("  evictions: " + ", ".join(f"{k}={v}" for k, v in sorted(ev.items())))
        values = rtt_values(rows["requests"], arm)
        if values.size:
            lines.append(f"  requests: {values.size}  rtt mean={values.mean():.4f} ms  "
                         f"std={values.std():.4f} ms  p50={np.quantile(values, 0.5):.4f}  "
                         f"p95={np.quantile(values, 0.95):.4f}  p99={np.quantile(values, 0.99):.4f}")
            counts = replica_request_counts(rows["requests"], arm)
            share = ", ".join(f"{rep}={n}" for rep, n in sorted(counts.items()))
            lines.append(f"  per-replica request counts: {share}")
        if rows["timeseries"]:
            per_rep = [convergence_time(rows["timeseries"], arm, rep) for rep in reps]
            per_rep = [t for t in per_rep if t is not None]
            if per_rep:
                lines.append("  convergence time per repetition (s): "
                             + ", ".join(f"{t:.0f}" for t in per_rep))
    return "\n".join(lines) + "\n"


def render_comparison(rows: dict[str, list[dict]], cdf_step: float = 0.01) -> str:
    """Baseline-vs-custom comparison tables recomputed from the CSVs."""
    lines = [render_summary(rows)]
    arms = arms_in(rows)
    with_rtt = [a for a in arms if rtt_values(rows["requests"], a).size]
    if len(with_rtt) >= 2:
        lines.append("== rtt cdf comparison ==")
        grids = {a: dict(rtt_cdf(rtt_values(rows["requests"], a), cdf_step))
                 for a in with_rtt}
        qs = sorted(next(iter(grids.values()))) if grids else []
        headerfmt = "  q     " + "".join(f"{a:>14}" for a in with_rtt)
        lines.append(headerfmt)
        for q in qs:
            lines.append(f"  {q:0.2f}  " + "".join(f"{grids[a][q]:14.4f}" for a in with_rtt))
    return "\n".join(lines) + "\n"
