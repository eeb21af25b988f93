#!/usr/bin/env python3
"""Recompute experiment summary statistics from a per-replica records CSV.

The simulation harness emits two artifacts per run: a records CSV (one row
per replica, 17-significant-digit decimal floats, lossless for doubles) and
a JSON summary of aggregates. This tool re-derives every aggregate that is a
pure function of the CSV, so persistence can be audited end to end:

    summarize_csv.py records.csv                   # print recomputed JSON
    summarize_csv.py records.csv --check-against summary.json
                                                   # exit 1 on any mismatch

The recomputation mirrors the harness arithmetic (same quantile
interpolation, same Hill tail-index estimator, same summation order), so
`--check-against` holds to 1e-12. Standard library only.
"""

import argparse
import csv
import json
import math
import sys

FULL_HEADER = ["replica_id", "seed_used", "coupled", "T", "steps",
               "final_Vsq", "final_Usq", "truncated"]
REDUCED_HEADER = ["replica_id", "seed_used", "scaledT", "absorbed",
                  "truncated", "tau_end"]
VALUE_HEADER = ["replica_id", "seed_used", "value"]
KOLMOGOROV_HEADER = ["replica_id", "seed_used", "coupled", "T", "loops",
                     "steps"]


def quantile_block(values):
    """count/mean/q05..q95 with the harness's linear interpolation."""
    if not values:
        return None
    vals = sorted(values)
    n = len(vals)

    def at(p):
        h = p * (n - 1)
        lo = int(h)
        fr = h - lo
        return vals[lo] * (1.0 - fr) + vals[lo + 1] * fr if lo + 1 < n else vals[lo]

    mean = 0.0
    for v in vals:  # sorted order, matching the harness
        mean += v
    mean /= n
    return {
        "count": n,
        "mean": mean,
        "q05": at(0.05),
        "q25": at(0.25),
        "q50": at(0.50),
        "q75": at(0.75),
        "q95": at(0.95),
    }


def tail_block(values, k_fraction):
    """Hill estimator over the top floor(k_fraction * n) order statistics."""
    finite = [v for v in values if math.isfinite(v)]
    n = len(finite)
    k = int(k_fraction * n)
    if k < 2 or k >= n or any(v <= 0.0 for v in finite):
        return None
    finite.sort()
    log_ref = math.log(finite[n - k - 1])
    denom = 0.0
    for i in range(n - k, n):
        denom += math.log(finite[i]) - log_ref
    if not denom > 0.0:
        return None
    kappa = k / denom
    return {"kappa_hat": kappa, "std_error": kappa / math.sqrt(k), "k": k}


def stderr_of(values):
    """Standard error of the mean, in row order like the harness."""
    n = len(values)
    if n < 2:
        return None
    mean = 0.0
    for v in values:
        mean += v
    mean /= n
    var = 0.0
    for v in values:
        var += (v - mean) * (v - mean)
    return math.sqrt(var / (n - 1) / n)


def read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader]
    return header, rows


def summarize_full(rows, key_time="T"):
    coupled_times = []
    coupled = truncated = 0
    for row in rows:
        if row["coupled"] == "1":
            coupled += 1
            coupled_times.append(float(row[key_time]))
        if row.get("truncated") == "1":
            truncated += 1
    out = {
        "replicas": len(rows),
        "coupled": coupled,
        "coupled_fraction": coupled / len(rows),
        "truncated": truncated,
        "coupling_time": quantile_block(coupled_times),
    }
    return out


def summarize_reduced(rows, k_fraction):
    absorbed = truncated = 0
    all_finite, conditioned = [], []
    for row in rows:
        t = float(row["scaledT"])
        is_absorbed = row["absorbed"] == "1"
        is_truncated = row["truncated"] == "1"
        if is_absorbed:
            absorbed += 1
        if is_truncated:
            truncated += 1
        finite = math.isfinite(t) and t > 0.0
        if finite:
            all_finite.append(t)
            if is_absorbed and not is_truncated:
                conditioned.append(t)
    return {
        "replicas": len(rows),
        "absorbed": absorbed,
        "truncated": truncated,
        "conditioned": len(conditioned),
        "scaledT_all": quantile_block(all_finite),
        "scaledT_conditioned": quantile_block(conditioned),
        "tail_index_all": tail_block(all_finite, k_fraction),
        "tail_index_conditioned": tail_block(conditioned, k_fraction),
    }


def summarize_values(rows):
    vals = [float(row["value"]) for row in rows]
    finite = [v for v in vals if math.isfinite(v)]
    return {
        "replicas": len(rows),
        "value": quantile_block(finite),
        "std_error_of_mean": stderr_of(finite),
    }


def summarize_kolmogorov(rows):
    out = summarize_full(rows)
    del out["truncated"]  # not part of this experiment's records
    loops = [float(row["loops"]) for row in rows if row["coupled"] == "1"]
    out["loops"] = quantile_block(loops)
    return out


def summarize(path, k_fraction):
    header, raw = read_rows(path)
    rows = [dict(zip(header, row)) for row in raw]
    if header == FULL_HEADER:
        return "full-coupling", summarize_full(rows)
    if header == REDUCED_HEADER:
        return "reduced-coupling-dist", summarize_reduced(rows, k_fraction)
    if header == VALUE_HEADER:
        return "dufresne-check", summarize_values(rows)
    if header == KOLMOGOROV_HEADER:
        return "kolmogorov", summarize_kolmogorov(rows)
    raise SystemExit(f"unrecognized CSV header: {header}")


def compare(recomputed, summary, tol, prefix=""):
    """Compare every recomputed leaf against the harness summary."""
    mismatches = []
    if isinstance(recomputed, dict):
        if not isinstance(summary, dict):
            return [f"{prefix}: summary value is not an object"]
        for key, val in recomputed.items():
            if key not in summary:
                mismatches.append(f"{prefix}{key}: missing from summary")
                continue
            mismatches += compare(val, summary[key], tol, f"{prefix}{key}.")
        return mismatches
    if recomputed is None:
        if summary is not None:
            mismatches.append(f"{prefix[:-1]}: recomputed empty, summary has "
                              f"{summary!r}")
        return mismatches
    a, b = float(recomputed), float(summary)
    if not (abs(a - b) <= tol * max(1.0, abs(a), abs(b))):
        mismatches.append(f"{prefix[:-1]}: recomputed {a!r} vs summary {b!r}")
    return mismatches


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("records", help="per-replica records CSV")
    ap.add_argument("--check-against", metavar="SUMMARY_JSON",
                    help="harness summary to verify; exits 1 on mismatch")
    ap.add_argument("--tol", type=float, default=1e-12,
                    help="relative comparison tolerance (default 1e-12)")
    ap.add_argument("--k-fraction", type=float, default=None,
                    help="Hill-estimator fraction (default: from the summary "
                         "config, else 0.05)")
    args = ap.parse_args()

    summary = None
    k_fraction = args.k_fraction
    if args.check_against:
        with open(args.check_against) as fh:
            summary = json.load(fh)
        if k_fraction is None:
            k_fraction = summary.get("config", {}).get("k_fraction")
    if k_fraction is None:
        k_fraction = 0.05

    kind, recomputed = summarize(args.records, k_fraction)
    if summary is None:
        print(json.dumps({"experiment": kind, **recomputed}, indent=2))
        return 0

    if "experiment" in summary and summary["experiment"] != kind:
        print(f"experiment mismatch: CSV looks like {kind}, summary says "
              f"{summary['experiment']}", file=sys.stderr)
        return 1
    mismatches = compare(recomputed, summary, args.tol)
    if mismatches:
        for m in mismatches:
            print(f"mismatch: {m}", file=sys.stderr)
        return 1
    print(f"{kind}: {sum(1 for _ in iter_leaves(recomputed))} aggregates "
          f"match the summary within {args.tol:g}")
    return 0


def iter_leaves(node):
    if isinstance(node, dict):
        for v in node.values():
            yield from iter_leaves(v)
    elif node is not None:
        yield node


if __name__ == "__main__":
    sys.exit(main())
