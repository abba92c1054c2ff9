import numpy as np
import pytest

from cpeval.classifiers import ForestParams, LogisticParams
from cpeval.data import SplitSpec
from cpeval.errors import ConfigError, InstanceNeverTested, RepeatFailed
from cpeval.protocol import (
    AggregateStat,
    ExperimentConfig,
    SynthSpec,
    aggregate,
    load_source,
    per_compound_median,
    run_calibration_variability,
    run_repeated_split,
    run_seed_variability,
)


def make_config(**overrides):
    base = dict(
        source=SynthSpec(n=120, dim=3, separation=1.5),
        model_kind="random_forest",
        forest_params=ForestParams(n_trees=15, max_depth=6),
        split=SplitSpec(repeats=4, master_seed=21),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def small_result():
    return run_repeated_split(make_config())


class TestAggregate:
    def test_constant_values(self):
        s = aggregate([0.7, 0.7, 0.7])
        assert s.mean == pytest.approx(0.7) and s.sd == 0.0 and s.n == 3

    def test_two_values_hand_arithmetic(self):
        s = aggregate([0.6, 0.8])
        assert s.mean == pytest.approx(0.7)
        assert s.sd == pytest.approx(0.1414, abs=1e-4)  # n-1 denominator
        assert s.se == pytest.approx(0.1)
        assert s.n == 2

    def test_single_value_undefined_dispersion(self):
        s = aggregate([0.42])
        assert s.mean == 0.42 and s.sd is None and s.se is None and s.n == 1

    def test_none_values_excluded_from_n(self):
        s = aggregate([0.5, None, 0.7, None])
        assert s.n == 2 and s.mean == pytest.approx(0.6)

    def test_all_none(self):
        s = aggregate([None, None])
        assert s.n == 0 and s.mean is None

    def test_median(self):
        assert aggregate([0.2, 0.4, 0.6]).median == pytest.approx(0.4)
        assert aggregate([0.2, 0.6]).median == pytest.approx(0.4)


class TestRunRepeatedSplit:
    def test_sizes_56_24_20(self):
        cfg = make_config(source=SynthSpec(n=100, dim=3), split=SplitSpec(repeats=2, master_seed=5))
        result = run_repeated_split(cfg)
        sizes = result.repeats[0]["sizes"]
        assert sizes == {"train": 80, "test": 20, "proper": 56, "calibration": 24}

    def test_deterministic(self):
        a = run_repeated_split(make_config())
        b = run_repeated_split(make_config())
        assert a.repeats == b.repeats
        assert a.aggregates == b.aggregates

    def test_parallel_equals_sequential(self):
        a = run_repeated_split(make_config())
        b = run_repeated_split(make_config(), workers=3)
        assert a.repeats == b.repeats
        assert a.instance_rows == b.instance_rows

    def test_aggregates_recomputable_from_records(self, small_result):
        ccrs = [r["qsar"]["ccr"] for r in small_result.repeats]
        assert small_result.aggregates["qsar"]["ccr"] == aggregate(ccrs)
        key = "0.2"
        kept = [
            r["mcp"][key]["scenarios"]["uncertain_out"]["kept_fraction"]
            for r in small_result.repeats
        ]
        assert (
            small_result.aggregates["mcp"][key]["scenarios"]["uncertain_out"]["kept_fraction"]
            == aggregate(kept)
        )

    def test_single_repeat_aggregate(self):
        cfg = make_config(split=SplitSpec(repeats=1, master_seed=3))
        result = run_repeated_split(cfg)
        s = result.aggregates["qsar"]["ccr"]
        assert s.n == 1 and s.sd is None
        assert s.mean == result.repeats[0]["qsar"]["ccr"]

    def test_failing_repeat_names_index(self):
        # 6 instances cannot survive an 80/20 stratified split per class
        cfg = make_config(
            source=SynthSpec(n=6, dim=2),
            split=SplitSpec(repeats=2, master_seed=1),
        )
        with pytest.raises(RepeatFailed) as exc:
            run_repeated_split(cfg)
        assert exc.value.repeat_index == 0

    def test_nesting_across_confidence(self, small_result):
        for rec in small_result.repeats:
            rates = {k: rec["mcp"][k]["set_rates"] for k in ("0.3", "0.2", "0.1")}
            assert rates["0.2"]["both_rate"] >= rates["0.3"]["both_rate"]
            assert rates["0.1"]["both_rate"] >= rates["0.2"]["both_rate"]
            assert rates["0.2"]["empty_rate"] <= rates["0.3"]["empty_rate"]
            assert rates["0.1"]["empty_rate"] <= rates["0.2"]["empty_rate"]


class TestPerCompoundMedian:
    def test_median_conventions(self):
        assert float(np.median([0.2, 0.4, 0.6])) == pytest.approx(0.4)
        assert float(np.median([0.2, 0.6])) == pytest.approx(0.4)

    def test_summary_present_in_median_mode(self):
        cfg = make_config(
            split=SplitSpec(repeats=40, master_seed=9),
            aggregation_mode="per_compound_median",
        )
        result = run_repeated_split(cfg)
        summary = result.median_summary
        assert summary is not None
        assert set(summary["mcp"]) == {"0.3", "0.2", "0.1"}
        assert 0 <= summary["qsar"]["ccr"] <= 1
        assert summary["tested_counts"]["min"] >= 1

    def test_never_tested_instance_raises(self):
        cfg = make_config(split=SplitSpec(repeats=1, master_seed=9))
        result = run_repeated_split(cfg)
        ds = load_source(cfg)
        with pytest.raises(InstanceNeverTested):
            per_compound_median(result.instance_rows, ds, cfg)

    def test_repeats_one_medians_equal_raw(self):
        cfg = make_config(split=SplitSpec(repeats=1, master_seed=9))
        result = run_repeated_split(cfg)
        rows = result.instance_rows
        ds = load_source(cfg)
        tested = ds.subset([i for i, x in enumerate(ds.ids) if x in {r["id"] for r in rows}])
        summary = per_compound_median(rows, tested, cfg)
        assert summary["qsar"] == result.repeats[0]["qsar"]
        # same instances, same p-values -> same confusion at each eps
        for key in ("0.3", "0.2", "0.1"):
            assert summary["mcp"][key]["confusion"] == result.repeats[0]["mcp"][key]["confusion"]


class TestSeedVariability:
    def test_logistic_zero_variance(self):
        cfg = make_config(model_kind="logistic", logistic_params=LogisticParams(iterations=50))
        result = run_seed_variability(cfg, 5)
        for m in ("sensitivity", "specificity", "ccr"):
            assert result.aggregates[m].sd == 0.0
        assert result.flip_count == 0
        assert result.max_proba_spread == 0.0

    def test_forest_reports_flips_near_half(self):
        cfg = make_config(
            source=SynthSpec(n=400, dim=3, separation=0.5),
            forest_params=ForestParams(n_trees=25, max_depth=10),
        )
        result = run_seed_variability(cfg, 10)
        assert result.flip_count >= 0
        probas = result.proba_matrix
        labels = probas > 0.5
        flip_mask = labels.any(axis=0) & ~labels.all(axis=0)
        if result.flip_count > 0:
            dist = np.abs(probas.mean(axis=0) - 0.5)
            assert dist[flip_mask].mean() < dist.mean()

    def test_count_validation(self):
        with pytest.raises(ConfigError):
            run_seed_variability(make_config(), 1)

    def test_trial_count(self):
        result = run_seed_variability(make_config(), 3)
        assert result.n_trials == 3 and len(result.trials) == 3
        assert result.aggregates["ccr"].n == 3


class TestCalibrationVariability:
    def test_counts_and_labels(self):
        result = run_calibration_variability(make_config(), 4)
        assert result.n_trials == 4
        stat = result.aggregates["0.2"]["scenarios"]["excl"]["ccr"]
        assert isinstance(stat, AggregateStat) and stat.n == 4

    def test_deterministic(self):
        a = run_calibration_variability(make_config(), 3)
        b = run_calibration_variability(make_config(), 3)
        assert a.trials == b.trials

    def test_count_validation(self):
        with pytest.raises(ConfigError):
            run_calibration_variability(make_config(), 1)

    def test_tiny_calibration_p_value_lattice(self):
        # one calibration instance per class -> attainable p-values are 1/2 and 1
        from cpeval.conformal import CalibrationTable, p_values

        table = CalibrationTable(np.array([0.3]), np.array([0.6]))
        seen = set()
        for proba in np.linspace(0, 1, 101):
            p = p_values(table, proba)
            seen.add(p.p_pos)
            seen.add(p.p_neg)
        assert seen <= {0.5, 1.0}


class TestConfigValidation:
    def test_bad_eps(self):
        with pytest.raises(ConfigError):
            make_config(eps_grid=(1.5,))

    def test_bad_scenario(self):
        with pytest.raises(ConfigError):
            make_config(scenarios=("nope",))

    def test_bad_mode(self):
        with pytest.raises(ConfigError):
            make_config(aggregation_mode="sometimes")
