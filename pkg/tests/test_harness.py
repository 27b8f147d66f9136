import json
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from mtsplab import harness
from mtsplab.harness import (
    BoxStats,
    CampaignConfig,
    ConfigError,
    ResultRecord,
    boxplot,
    decile,
    emit_report,
    emit_span_report,
    load_records,
    quantile,
    ratios,
    read_cell,
    run_campaign,
)

GOLDEN = Path(__file__).parent / "golden"


def record(mech, n, shift, total, m=2):
    return ResultRecord(mech, m, n, shift, total, [total], 1, 0.0, False, True)


def small_cfg(tmp_path, **kw):
    base = dict(mechanisms=["p2p"], m_values=[2], n_values=[8], shifts=[0], limit_ms=5000.0,
                out=str(tmp_path / "c"), deterministic=True)
    base.update(kw)
    return CampaignConfig(**base)


# statistics


def test_decile_rule():
    values = list(range(1, 131))
    assert decile(values, 5) == 65
    assert decile(values, 9) == 117
    assert decile([4.2], 3) == 4.2
    assert decile([7] * 10, 9) == 7
    with pytest.raises(ValueError):
        decile([], 5)
    with pytest.raises(ValueError):
        decile([1], 10)


def oracle_quantile(values, p_num, p_den):
    xs = sorted(values)
    # smallest x with at least p of the sample at or below it
    for x in xs:
        if sum(v <= x for v in xs) * p_den >= p_num * len(xs):
            return x


@settings(max_examples=100)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60), st.integers(1, 9))
def test_decile_matches_order_statistic_oracle(values, k):
    assert decile(values, k) == oracle_quantile(values, k, 10)
    assert decile(values, 5) <= decile(values, 9)


def test_quantile_extremes():
    assert quantile([3, 1, 2], 0, 4) == 1
    assert quantile([3, 1, 2], 4, 4) == 3


def test_boxplot():
    box = boxplot([1, 2, 3, 4, 5])
    assert box.median == 3 and box.min == 1 and box.max == 5
    flat = boxplot([2.0] * 6)
    assert flat == BoxStats(2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0)
    with pytest.raises(ValueError):
        boxplot([])


@settings(max_examples=100)
@given(st.lists(st.floats(0, 1000), min_size=1, max_size=50))
def test_boxplot_matches_sort_oracle(values):
    box = boxplot(values)
    xs = sorted(values)
    q1, q3 = oracle_quantile(xs, 1, 4), oracle_quantile(xs, 3, 4)
    assert (box.q1, box.median, box.q3) == (q1, oracle_quantile(xs, 1, 2), q3)
    assert box.min <= box.whisker_low <= box.q1 <= box.median <= box.q3 <= box.whisker_high <= box.max
    reach = 1.5 * (q3 - q1)
    assert box.whisker_low == min(x for x in xs if x >= q1 - reach)
    assert box.whisker_high == max(x for x in xs if x <= q3 + reach)


# ratios and reports


def test_self_ratio_is_one():
    recs = [record("optdecentr", 8, s, 10.0 + s) for s in range(5)]
    recs += [record("p2p", 8, s, 10.0 + s) for s in range(5)]
    table = ratios(recs, "optdecentr")
    assert table.values("p2p", 2, 8) == [1.0] * 5
    assert table.summary()[("p2p", 2, 8)] == {"median": 1.0, "decile9": 1.0}


def test_ratios_pair_same_instance_and_flag_gaps():
    recs = [record("optdecentr", 8, 0, 10.0), record("optdecentr", 8, 1, 20.0)]
    recs += [record("cnp", 8, 1, 30.0), record("cnp", 8, 0, 12.0), record("cnp", 8, 2, 50.0)]
    table = ratios(recs, "optdecentr")
    assert table.entries[("cnp", 2, 8)] == [(0, 1.2), (1, 1.5)]
    assert table.gaps == [("cnp", 2, 8, 2)]


def test_synthetic_ratio_deciles():
    recs = [record("optdecentr", 9, s, 1.0) for s in range(130)]
    recs += [record("auction", 9, s, float(130 - s)) for s in range(130)]
    row = ratios(recs, "optdecentr").summary()[("auction", 2, 9)]
    assert row == {"median": 65.0, "decile9": 117.0}


def test_emit_report_shape(tmp_path):
    recs = []
    for n in (8, 9, 10):
        for s in range(4):
            recs.append(record("optdecentr", n, s, 10.0))
            recs.append(record("p2p", n, s, 11.0 + s))
            recs.append(record("cluster", n, s, 10.5))
    files = emit_report(ratios(recs, "optdecentr"), tmp_path)
    names = sorted(p.name for p in files)
    assert names == ["ratio_optdecentr_decile9_m2.csv", "ratio_optdecentr_median_m2.csv", "summary_optdecentr.txt"]
    rows = (tmp_path / "ratio_optdecentr_median_m2.csv").read_text().splitlines()
    assert rows[0] == "n,mechanism,value"
    assert len(rows) == 1 + 6


def test_emit_report_empty_selection(tmp_path):
    recs = [record("optdecentr", 8, 0, 1.0), record("p2p", 8, 0, 1.0)]
    with pytest.raises(ValueError):
        emit_report(ratios(recs, "optdecentr"), tmp_path, mechanisms=[])
    with pytest.raises(ValueError):
        emit_report(ratios(recs[:1], "optdecentr"), tmp_path)


# campaigns


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        small_cfg(tmp_path, mechanisms=[]).validate()
    with pytest.raises(ConfigError):
        small_cfg(tmp_path, mechanisms=["nope"]).validate()
    with pytest.raises(ConfigError):
        small_cfg(tmp_path, m_values=[8]).validate()
    with pytest.raises(ConfigError):
        small_cfg(tmp_path, limit_ms=0).validate()
    with pytest.raises(ConfigError):
        small_cfg(tmp_path, n_values=[131]).validate()
    small_cfg(tmp_path, limit_ms=None).validate()


def test_single_cell(tmp_path):
    cfg = small_cfg(tmp_path)
    result = run_campaign(cfg)
    assert len(result) == 1 and result.executed == 1 and not result.failed
    rec, trace = read_cell(harness.cell_path(cfg.out, "p2p", 2, 8, 0))
    assert rec == result[0]
    assert trace.mechanism == "p2p"
    manifest = json.loads((Path(cfg.out) / "manifest.json").read_text())
    assert "round-robin" in manifest["endowment_rule"]
    assert "lower empirical" in manifest["quantile_rule"]


def test_full_shift_range(tmp_path):
    cfg = small_cfg(tmp_path, mechanisms=["norealloc"], shifts=list(range(130)))
    result = run_campaign(cfg)
    assert len(result) == 130
    assert sorted(r.shift for r in result) == list(range(130))


def test_resume_runs_nothing_new(tmp_path, monkeypatch):
    cfg = small_cfg(tmp_path, mechanisms=["p2p", "optdecentr"], shifts=[0, 1])
    first = run_campaign(cfg)
    calls = []
    monkeypatch.setattr(harness, "run_mechanism", lambda *a, **k: calls.append(a))
    again = run_campaign(cfg)
    assert again.executed == 0 and not calls
    assert list(again) == list(first)


def test_failed_cell_does_not_abort(tmp_path, monkeypatch):
    cfg = small_cfg(tmp_path, mechanisms=["p2p", "cnp"])
    real = harness.run_mechanism

    def flaky(name, *a, **k):
        if name == "cnp":
            raise OSError("disk on fire")
        return real(name, *a, **k)

    monkeypatch.setattr(harness, "run_mechanism", flaky)
    result = run_campaign(cfg)
    assert [r.mechanism for r in result] == ["p2p"]
    assert result.failed[0]["mechanism"] == "cnp"
    assert "disk on fire" in result.failed[0]["error"]
    assert (Path(cfg.out) / "failed.json").exists()


def test_deterministic_campaigns_are_identical(tmp_path):
    files = []
    for name in ("a", "b"):
        cfg = small_cfg(tmp_path, mechanisms=["cnp", "auction"], n_values=[9], shifts=[3, 4], out=str(tmp_path / name))
        run_campaign(cfg)
        files.append({p.relative_to(cfg.out): p.read_bytes() for p in Path(cfg.out).rglob("*.jsonl")})
    assert files[0] == files[1] and len(files[0]) == 4


def test_parallel_jobs_match_serial(tmp_path):
    serial = run_campaign(small_cfg(tmp_path, mechanisms=["p2p", "cluster"], shifts=[0, 1, 2], out=str(tmp_path / "s")))
    par = run_campaign(small_cfg(tmp_path, mechanisms=["p2p", "cluster"], shifts=[0, 1, 2], out=str(tmp_path / "p"), jobs=2))
    assert list(serial) == list(par)


def golden_campaign(out):
    cfg = CampaignConfig(
        mechanisms=["p2p", "cluster", "optdecentr", "fullcentr"],
        m_values=[2],
        n_values=[8, 9, 10],
        shifts=[0, 1, 2, 3],
        limit_ms=5000.0,
        out=str(out),
        deterministic=True,
    )
    run_campaign(cfg)
    records = load_records(out)
    report = Path(out) / "report"
    emit_report(ratios(records, "optdecentr"), report)
    emit_span_report(records, report)
    return report


def test_golden_report(tmp_path):
    report = golden_campaign(tmp_path / "g")
    expected = sorted(p.name for p in GOLDEN.iterdir())
    assert sorted(p.name for p in report.iterdir()) == expected
    for name in expected:
        assert (report / name).read_bytes() == (GOLDEN / name).read_bytes(), name
