import random
from decimal import Decimal

import pytest

from clmm_lp_impact.counterfactual import (
    INFINITY,
    REPORT_COLUMNS,
    AnalysisError,
    BaselineFlags,
    ClassifierConfig,
    ImpactEvaluator,
    Label,
    LsisReport,
    OwnerStats,
    baseline_b1,
    baseline_b2,
    baseline_b3,
    baseline_flags,
    classify,
    classify_one,
    lsis_score,
    nearest_rank_percentile,
    owner_stats,
    read_reports_csv,
    read_reports_json,
    run_analysis,
    sort_reports,
    top_percentile,
    write_reports_csv,
    write_reports_json,
)
from clmm_lp_impact.liquidity import build_liquidity_profile
from clmm_lp_impact.swap_math import DEFAULT_GRID, SyntheticSwap, generate_synthetic_swaps
from clmm_lp_impact.synthetic import (
    address,
    dataset,
    event,
    linchpin_fixture,
    random_dataset,
    sole_lp_fixture,
)

from oracles import naive_analysis
from published_labels import ROWS


def by_owner(result):
    return {r.owner: r for r in result.reports}


# -- LSIS


def test_lsis_formula():
    assert lsis_score(Decimal("0.5"), Decimal("1.0")) == 1
    assert lsis_score(Decimal("2"), Decimal("2")) == 0


def test_lsis_zero_guard():
    assert lsis_score(Decimal(0), Decimal(5)) == 0


def test_no_op_lp_scores_exactly_zero():
    ds = dataset([
        event("Mint", 1, -100, 100, 10**18, 1),
        event("Mint", 2, -50, 50, 10**17, 2),
        event("Burn", 2, -50, 50, 10**17, 3),
    ])
    rep = by_owner(run_analysis(ds, k=2))[address(2)]
    assert rep.lsis == 0
    assert rep.pi_excluded == rep.pi_baseline
    assert not rep.collapsed


def test_sole_lp_collapses_to_infinity():
    res = run_analysis(sole_lp_fixture(), k=1)
    (rep,) = res.reports
    assert rep.collapsed and rep.lsis == INFINITY
    assert rep.skipped_swaps == res.swap_count
    assert rep.label == Label.LINCHPIN_WHALE


def test_pi_baseline_zero_gives_zero_lsis():
    ds = dataset([event("Mint", 1, -100, 100, 1000, 1), event("Mint", 2, -100, 100, 1000, 2)])
    null = [SyntheticSwap(0, Decimal(0), Decimal(0), 2000, 2**96)]
    res = run_analysis(ds, k=2, swaps=null)
    assert res.pi_baseline == 0
    assert all(r.lsis == 0 and r.pi_baseline == 0 for r in res.reports)


def test_linchpin_dominates():
    res = run_analysis(linchpin_fixture(), k=5)
    top = res.reports[0]
    assert top.owner == address(1)
    assert top.lsis > 100
    assert top.label == Label.LINCHPIN_WHALE
    assert all(r.lsis < 1 for r in res.reports[1:])


def test_analysis_rejects_bad_input():
    with pytest.raises(ValueError):
        run_analysis(linchpin_fixture(), k=0)
    empty = dataset([event("Mint", 1, -10, 10, 5, 1), event("Burn", 1, -10, 10, 5, 2)])
    with pytest.raises(AnalysisError):
        run_analysis(empty, k=1)


def test_uncomputable_baseline_raises():
    ds = dataset([event("Mint", 1, -100, 100, 1000, 1)])
    huge = [SyntheticSwap(0, Decimal(10**9), Decimal(0), 1000, 2**96)]
    with pytest.raises(AnalysisError, match="uncomputable"):
        run_analysis(ds, k=1, swaps=huge)


@pytest.mark.parametrize("seed", range(8))
def test_matches_naive_oracle(seed):
    ds = random_dataset(seed, 80, 8, tick_radius=400, max_width=20)
    res = run_analysis(ds, k=8, seed=seed)
    swaps = generate_synthetic_swaps(build_liquidity_profile(ds), *DEFAULT_GRID, rng_seed=seed)
    assert res.swap_count == len(swaps)
    naive = naive_analysis(ds, [r.owner for r in res.reports], swaps)
    for r in res.reports:
        pb, pe, skipped, collapsed = naive[r.owner]
        assert (r.pi_baseline, r.pi_excluded, r.skipped_swaps, r.collapsed) == (pb, pe, skipped, collapsed)


@pytest.mark.parametrize("seed", range(15))
def test_lsis_non_negative_on_well_formed_data(seed):
    ds = random_dataset(100 + seed, 60, 10, tick_radius=300, max_width=15)
    for r in run_analysis(ds, k=10, seed=seed).reports:
        assert r.lsis >= 0
        assert r.pi_excluded >= r.pi_baseline


def test_evaluator_incremental_matches_full():
    ds = random_dataset(5, 100, 10, tick_radius=400, max_width=20)
    base = build_liquidity_profile(ds)
    swaps = generate_synthetic_swaps(base, *DEFAULT_GRID, rng_seed=1)
    ev = ImpactEvaluator(swaps, base)
    from clmm_lp_impact.swap_math import swap_impacts
    for owner in ds.owners:
        prof = build_liquidity_profile(ds, owner)
        assert ev.impacts_under(prof) == swap_impacts(swaps, prof)


def test_threads_give_identical_reports():
    ds = random_dataset(3, 120, 12, tick_radius=400, max_width=20)
    one = run_analysis(ds, k=12, threads=1)
    four = run_analysis(ds, k=12, threads=4)
    assert one.reports == four.reports
    assert one.pi_baseline == four.pi_baseline


def test_reports_sorted_and_metadata():
    res = run_analysis(random_dataset(4, 100, 10, tick_radius=400), k=10, seed=9)
    keys = [(-r.lsis, r.owner) for r in res.reports]
    assert keys == sorted(keys)
    assert res.metadata["seed"] == 9 and res.metadata["k"] == 10
    assert res.metadata["dataset_hash"] == random_dataset(4, 100, 10, tick_radius=400).content_hash()


def test_signed_and_canonical_modes_run():
    ds = linchpin_fixture()
    assert run_analysis(ds, k=2, signed=True).metadata["signed_mean"] is True
    canon = run_analysis(ds, k=5, canonical=True)
    assert canon.reports[0].owner == address(1)


# -- classifier


@pytest.mark.parametrize("name,lsis,rank,flags,label", ROWS, ids=[r[0] for r in ROWS])
def test_published_rows(name, lsis, rank, flags, label):
    assert classify_one(lsis, rank, BaselineFlags(*flags), ClassifierConfig()) == label


def test_spec_examples():
    cfg = ClassifierConfig()
    assert classify_one(Decimal("0.084"), 5, BaselineFlags(True, True), cfg) == Label.ACTIVE_CRITICAL_WHALE
    assert classify_one(Decimal("0.0000001"), 27, BaselineFlags(True, True), cfg) == Label.FALSE_POSITIVE_WHALE
    assert classify_one(Decimal("27.74"), 1283, BaselineFlags(b3=True), cfg) == Label.DORMANT_LINCHPIN
    assert classify_one(Decimal("4435716"), 338, BaselineFlags(), cfg) == Label.LINCHPIN_WHALE


def test_gap_between_epsilon_and_significant_is_non_whale():
    cfg = ClassifierConfig()
    assert classify_one(Decimal("0.005"), 3, BaselineFlags(True), cfg) == Label.NON_WHALE
    assert classify_one(Decimal(0), 3, BaselineFlags(), cfg) == Label.NON_WHALE


def test_infinite_lsis_is_linchpin():
    assert classify_one(INFINITY, 1, BaselineFlags(), ClassifierConfig()) == Label.LINCHPIN_WHALE
    assert classify_one(INFINITY, 10**6, BaselineFlags(), ClassifierConfig()) == Label.DORMANT_LINCHPIN


def test_config_validation():
    with pytest.raises(ValueError):
        ClassifierConfig(lsis_epsilon="0.1", lsis_significant="0.01")
    with pytest.raises(ValueError):
        ClassifierConfig(active_rank_max=0)
    assert ClassifierConfig(lsis_linchpin=10).lsis_linchpin == Decimal(10)


def test_classify_relabels():
    r = LsisReport(address(1), 5, Decimal(1), Decimal(2), Decimal(1))
    (out,) = classify([r], ClassifierConfig(lsis_linchpin="0.5"))
    assert out.label == Label.LINCHPIN_WHALE


# -- baselines


def test_nearest_rank_percentile():
    assert nearest_rank_percentile(range(1, 101), 99) == 99
    assert nearest_rank_percentile([5], 99) == 5
    assert nearest_rank_percentile([1, 2, 3, 4], 50) == 2
    with pytest.raises(ValueError):
        nearest_rank_percentile([], 50)


def test_b1_equal_sizes_includes_ties():
    ds = dataset([event("Mint", i, -10, 10, 100, i) for i in range(1, 101)])
    assert baseline_b1(ds) == set(ds.owners)


def test_b1_picks_largest():
    ds = dataset([event("Mint", i, -10, 10, 100 * i, i) for i in range(1, 101)])
    assert baseline_b1(ds) == {address(99), address(100)}


def test_b2_single_lp():
    ds = dataset([event("Mint", 1, -10, 10, 100, 1)])
    assert baseline_b2(ds, Decimal(1)) == {address(1)}
    assert baseline_b2(ds, Decimal("0.01")) == {address(1)}


def test_b2_share_of_peak():
    ds = dataset([event("Mint", 1, -10, 10, 990, 1), event("Mint", 2, -10, 10, 10, 2)])
    assert baseline_b2(ds, Decimal("0.01")) == {address(1), address(2)}
    assert baseline_b2(ds, Decimal("0.02")) == {address(1)}


def test_turnover_uses_peak_when_fully_withdrawn():
    s = OwnerStats(minted=100, burned=100, outstanding=0, peak=100)
    assert s.turnover == 2
    assert OwnerStats().turnover == 0


def test_b3_flags_churning_large_lp():
    # sizes 20..1000 for owners 2..100; owners 2..6 churn but are small,
    # owner 100 is large but holds, owner 1 is both large and churning
    events = [event("Mint", i, -10, 10, 10 * i, i) for i in range(2, 101)]
    events += [event("Burn", i, -10, 10, 10 * i, 300 + i) for i in range(2, 7)]
    events += [event("Mint", 1, -10, 10, 2000, 200), event("Burn", 1, -10, 10, 2000, 201)]
    ds = dataset(events)
    stats, _ = owner_stats(ds)
    assert stats[address(1)].turnover == 2 and stats[address(100)].turnover == 1
    assert baseline_b1(ds) == {address(1), address(100)}
    assert baseline_b3(ds) == {address(1)}


def test_baseline_order_independent():
    ds = random_dataset(7, 150, 15)
    shuffled = list(ds.events)
    random.Random(1).shuffle(shuffled)
    assert baseline_flags(dataset(shuffled)) == baseline_flags(ds)


# -- helpers and files


def test_top_percentile():
    reps = [LsisReport(address(i), i, Decimal(1), Decimal(1), Decimal(i)) for i in range(1, 11)]
    assert [r.owner for r in top_percentile(reps, 20)] == [address(10), address(9)]
    assert len(top_percentile(reps, 1)) == 1
    with pytest.raises(ValueError):
        top_percentile(reps, 0)


def test_sort_reports_ties_by_owner():
    a = LsisReport(address(2), 1, Decimal(1), Decimal(1), Decimal(0))
    b = LsisReport(address(1), 2, Decimal(1), Decimal(1), Decimal(0))
    assert sort_reports([a, b]) == [b, a]


def test_csv_and_json_round_trip(tmp_path):
    res = run_analysis(linchpin_fixture(), k=5)
    write_reports_csv(res.reports, tmp_path / "r.csv")
    header = (tmp_path / "r.csv").read_text().splitlines()[0]
    assert header == ",".join(REPORT_COLUMNS)
    back = read_reports_csv(tmp_path / "r.csv")
    assert [r.owner for r in back] == [r.owner for r in res.reports]
    assert [r.label for r in back] == [r.label for r in res.reports]
    for a, b in zip(back, res.reports):
        assert abs(a.lsis - b.lsis) <= abs(b.lsis) * Decimal("1e-29")
    write_reports_json(res, tmp_path / "r.json")
    assert [r.owner for r in read_reports_json(tmp_path / "r.json")] == [r.owner for r in res.reports]


def test_csv_infinity_round_trip(tmp_path):
    res = run_analysis(sole_lp_fixture(), k=1)
    write_reports_csv(res.reports, tmp_path / "r.csv")
    assert ",inf," in (tmp_path / "r.csv").read_text()
    (back,) = read_reports_csv(tmp_path / "r.csv")
    assert back.collapsed and back.lsis == INFINITY
