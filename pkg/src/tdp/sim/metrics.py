"""Metric exports (CDF and false-positive time series) and run comparison."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .engine import MetricsRecord


def cdf(values) -> list[tuple[float, float]]:
    """Empirical CDF points (value, P[X <= value])."""
    vals = sorted(values)
    n = len(vals)
    return [(v, (k + 1) / n) for k, v in enumerate(vals)]


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def summarize(record: MetricsRecord) -> dict:
    benign, attackers = record.benign, record.attackers
    return {
        "devices": len(record.devices),
        "attackers": list(attackers),
        "attacker_model": record.config.get("attacker_model"),
        "mean_trust_benign": record.mean_trust(benign) if benign else None,
        "mean_trust_attacker": record.mean_trust(attackers) if attackers else None,
        "false_positives": record.false_positives,
        "transactions": len(record.transactions),
        "failed_pairings": record.failed_pairings,
        "no_candidate": record.no_candidate,
        "forged_offers": record.forged_offers,
        "forged_selected": record.forged_selected,
        "accepted_receipts": record.accepted_receipts,
        "rejected_receipts": record.rejected_receipts,
        "sigma_bars": record.sigma_bars,
        "final_trust": {d: record.final_trust[d] for d in record.devices},
        "txn_counts": {d: record.txn_counts[d] for d in record.devices},
    }


def collect_metrics(record: MetricsRecord, out_dir: str | Path | None = None) -> dict[str, str]:
    """Render the CDF/TVF exports; write them to ``out_dir`` when given.

    Returns the file contents keyed by file name.
    """
    atk = set(record.attackers)
    cdf_rows = []
    for cohort, members in (("benign", record.benign), ("attacker", record.attackers)):
        for v, p in cdf(record.final_trust[d] for d in members):
            cdf_rows.append((cohort, v, p))
    files = {
        "cdf.csv": _csv(cdf_rows, ["cohort", "trustvalue", "cumulative_probability"]),
        "fp_timeseries.csv": _csv(record.fp_series, ["time", "cumulative_count"]),
        "trust_final.csv": _csv(
            [(d, "attacker" if d in atk else "benign", record.final_trust[d], record.txn_counts[d])
             for d in record.devices],
            ["device_id", "cohort", "trustvalue", "transactions"],
        ),
        "trust_timeseries.csv": _csv(record.trust_series, ["time", "device_id", "trustvalue"]),
        "transactions.csv": _csv(
            [(t.time, t.requester, t.peer, t.q, t.c, t.sigma, t.rating_of_peer, t.rating_of_requester,
              int(t.false_positive)) for t in record.transactions],
            ["time", "requester", "peer", "qos", "credibility", "sigma", "rating_of_peer",
             "rating_of_requester", "false_positive"],
        ),
        "summary.json": json.dumps(summarize(record), indent=2, sort_keys=True) + "\n",
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).write_text(text)
    return files


def _rel(new, old) -> float | None:
    if new is None or old is None or old == 0:
        return None
    return (new - old) / old


def _fmt(v, d) -> str:
    if v is None:
        return "n/a"
    if d is None:
        return f"{v:.4g}"
    arrow = "+" if d >= 0 else ""
    return f"{v:.4g} ({arrow}{d * 100:.1f}%)"


def _load_run(run_dir: Path) -> dict:
    summary_path = run_dir / "summary.json"
    txn_path = run_dir / "transactions.csv"
    for p in (summary_path, txn_path):
        if not p.exists():
            raise FileNotFoundError(f"missing run output: {p}")
    summary = json.loads(summary_path.read_text())
    with open(txn_path) as fh:
        summary["_transactions"] = [(float(r["time"]), r["requester"], r["peer"]) for r in csv.DictReader(fh)]
    return summary


def _attracted(txns, cohort) -> int:
    return sum(1 for _, req, peer in txns if peer in cohort and req not in cohort)


def _ks(xs, ys) -> float:
    """Two-sample Kolmogorov-Smirnov distance."""
    if not xs or not ys:
        return float("nan")
    pts = sorted(set(xs) | set(ys))
    xs, ys = sorted(xs), sorted(ys)
    import bisect
    return max(abs(bisect.bisect_right(xs, p) / len(xs) - bisect.bisect_right(ys, p) / len(ys)) for p in pts)


def compare_runs(baseline: dict, attack: dict) -> dict:
    """Compare cohorts of an attack run with the same devices in a baseline run.

    The cohorts are taken from the attack run; relative deltas are against the
    baseline values of the same devices.
    """
    atk = set(attack["attackers"])
    benign = [d for d in attack["final_trust"] if d not in atk]
    attackers = sorted(atk)

    def mean(summary, cohort):
        vals = [summary["final_trust"][d] for d in cohort]
        return sum(vals) / len(vals) if vals else None

    out = {}
    for name, cohort in (("benign", benign), ("attacker", attackers)):
        b, a = mean(baseline, cohort), mean(attack, cohort)
        out[f"mean_{name}_baseline"] = b
        out[f"mean_{name}_attack"] = a
        out[f"mean_{name}_delta"] = _rel(a, b)
        out[f"cdf_ks_{name}"] = _ks(
            [baseline["final_trust"][d] for d in cohort], [attack["final_trust"][d] for d in cohort]
        ) if cohort else None
    fp_base = _attracted(baseline["_transactions"], atk)
    fp_atk = _attracted(attack["_transactions"], atk)
    out["false_positives_baseline"] = fp_base
    out["false_positives_attack"] = fp_atk
    out["false_positives_delta"] = _rel(fp_atk, fp_base)
    out["lines"] = [
        f"benign-{attack.get('attacker_model')} {_fmt(out['mean_benign_attack'], out['mean_benign_delta'])}"
        f" vs benign-none {_fmt(out['mean_benign_baseline'], None)}",
        f"attacker-{attack.get('attacker_model')} {_fmt(out['mean_attacker_attack'], out['mean_attacker_delta'])}"
        f" vs attacker-none {_fmt(out['mean_attacker_baseline'], None)}",
        f"false-positive {_fmt(fp_atk, out['false_positives_delta'])} vs none {fp_base}",
    ]
    return out


def compare_dirs(baseline_dir: str | Path, attack_dir: str | Path) -> dict:
    return compare_runs(_load_run(Path(baseline_dir)), _load_run(Path(attack_dir)))
