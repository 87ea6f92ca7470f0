import json
import math

import pytest

from tdp.sim.config import ConfigError, SimConfig
from tdp.sim.engine import MetricsRecord, choose_attackers, run
from tdp.sim.metrics import _ks, cdf, collect_metrics, compare_runs, summarize
from tdp.sim.trace import dump_trace, synth_trace, contact_rate_for
from tdp.trust import damping_cutoff

SMALL = dict(n_devices=12, duration=6000.0, expected_contacts=40.0, upload_interval=500.0)


def small(**kw):
    return SimConfig(**{**SMALL, **kw})


@pytest.fixture(scope="module")
def baseline():
    return run(small(seed=3))


def test_deterministic_outputs(baseline):
    again = run(small(seed=3))
    assert collect_metrics(again) == collect_metrics(baseline)


def test_conservation(baseline):
    n = len(baseline.transactions)
    assert n > 50
    assert sum(baseline.txn_counts.values()) == 2 * n
    assert baseline.accepted_receipts == 2 * n and baseline.rejected_receipts == 0
    assert all(0.0 <= t.q <= 1.0 and 0.0 <= t.c <= 1.0 for t in baseline.transactions)
    assert baseline.false_positives == 0 and baseline.attackers == []


def test_trust_series_covers_every_upload(baseline):
    times = sorted({t for t, _, _ in baseline.trust_series})
    assert len(times) == 12  # 11 interior ticks plus the final upload
    final = {d: v for t, d, v in baseline.trust_series if t == times[-1]}
    assert final == baseline.final_trust


def test_zero_intensity_matches_baseline(baseline):
    rec = run(small(seed=3, attacker_model="TO2", attack_intensity=0.0))
    assert rec.final_trust == baseline.final_trust
    assert [t.peer for t in rec.transactions] == [t.peer for t in baseline.transactions]


def test_attacker_count_and_selection():
    ids = [f"d{i:02d}" for i in range(40)]
    cfg = SimConfig(attacker_model="TO2", attacker_pct=0.1)
    atk = choose_attackers(cfg, ids)
    assert len(atk) == 4 and atk == sorted(set(atk))
    assert choose_attackers(cfg, ids) == atk
    assert choose_attackers(cfg.replace(attacker_model="none"), ids) == []


def test_top_tv_selection_uses_baseline(baseline):
    cfg = small(seed=3, attacker_model="TO2", attacker_selection="topTV", attacker_pct=0.25)
    chosen = choose_attackers(cfg, sorted(baseline.final_trust))
    top = sorted(baseline.final_trust, key=lambda d: (-baseline.final_trust[d], d))[:3]
    assert chosen == sorted(top)


def test_to1_forgeries_never_selected():
    rec = run(small(seed=1, attacker_model="TO1", attacker_pct=0.25))
    assert rec.forged_offers > 0
    assert rec.forged_selected == 0


def test_to2_ratings_all_negative():
    rec = run(small(seed=2, attacker_model="TO2", attacker_pct=0.25))
    atk = set(rec.attackers)
    by_attacker = [t.rating_of_peer for t in rec.transactions if t.requester in atk]
    by_attacker += [t.rating_of_requester for t in rec.transactions if t.peer in atk]
    assert by_attacker and set(by_attacker) == {-1}


def test_damping_zeroes_credibility_past_cutoff():
    cfg = small(seed=4, attacker_model="TO3", attacker_pct=0.25, trust={"sigma_bar": 2.0})
    rec = run(cfg)
    cutoff = damping_cutoff(cfg.trust.c_w, 2.0)
    past = [t for t in rec.transactions if t.sigma > cutoff]
    assert past and all(t.c == 0.0 for t in past)


def test_user_trace(tmp_path):
    import random

    evs = synth_trace(5, 3000, contact_rate_for(5, 3000, 20), random.Random(0))
    p = tmp_path / "trace.txt"
    dump_trace(evs, p)
    rec = run(SimConfig(trace_path=str(p), duration=3000))
    assert sorted(rec.final_trust) == sorted({e.node_i for e in evs} | {e.node_j for e in evs})


def test_config_validation_and_roundtrip(tmp_path):
    cfg = small(seed=9, attacker_model="TO3")
    assert SimConfig.from_dict(json.loads(cfg.dumps())) == cfg
    p = tmp_path / "c.yaml"
    p.write_text("seed: 4\nattacker_model: TO2\ntrust:\n  c_g: 0.2\n")
    loaded = SimConfig.load(p)
    assert loaded.seed == 4 and loaded.trust.c_g == 0.2 and loaded.trust.sigma_bar == 110
    for bad in ({"attacker_model": "TO9"}, {"attack_intensity": 2}, {"qos_model": "x"},
                {"bogus": 1}, {"duration": 0}, {"task_type": "nope"}):
        with pytest.raises(ConfigError):
            SimConfig.from_dict(bad)


# -- metrics -------------------------------------------------------------------

def test_cdf_valid():
    pts = cdf([0.3, 0.1, 0.2])
    assert [v for v, _ in pts] == [0.1, 0.2, 0.3]
    assert [p for _, p in pts] == pytest.approx([1 / 3, 2 / 3, 1.0])
    assert cdf([]) == []


def test_collect_metrics_files(baseline, tmp_path):
    files = collect_metrics(baseline, tmp_path)
    assert {"cdf.csv", "fp_timeseries.csv", "summary.json", "transactions.csv", "trust_final.csv"} <= set(files)
    lines = (tmp_path / "cdf.csv").read_text().splitlines()
    assert lines[0].startswith("cohort,trustvalue")
    assert all(l.startswith("benign,") for l in lines[1:])  # no attackers: attacker CDF empty
    assert (tmp_path / "fp_timeseries.csv").read_text().splitlines() == ["time,cumulative_count"]
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["false_positives"] == 0 and summary["mean_trust_attacker"] is None


def test_all_attackers_split():
    rec = MetricsRecord(config={}, devices=["a", "b"], attackers=["a", "b"], task_index=0,
                        final_trust={"a": 0.3, "b": 0.4}, txn_counts={"a": 0, "b": 0})
    text = collect_metrics(rec)["cdf.csv"]
    assert "benign" not in text and text.count("attacker,") == 2
    assert summarize(rec)["mean_trust_benign"] is None


def test_fp_series_monotone():
    rec = run(small(seed=5, attacker_model="TO2", attacker_pct=0.25))
    counts = [c for _, c in rec.fp_series]
    times = [t for t, _ in rec.fp_series]
    assert counts == list(range(1, len(counts) + 1))
    assert times == sorted(times)
    assert rec.false_positives == rec.attracted(rec.attackers)


def test_compare_self_is_zero(baseline):
    s = json.loads(collect_metrics(run(small(seed=3, attacker_model="TO2")))["summary.json"])
    s["_transactions"] = []
    rep = compare_runs(s, s)
    assert rep["mean_attacker_delta"] == 0.0 and rep["mean_benign_delta"] == 0.0
    assert rep["cdf_ks_benign"] == 0.0 and rep["cdf_ks_attacker"] == 0.0


def test_ks_distance():
    assert _ks([1, 2, 3], [1, 2, 3]) == 0.0
    assert _ks([0, 0], [1, 1]) == 1.0
    assert math.isnan(_ks([], [1]))
