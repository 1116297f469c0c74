import numpy as np
import pytest

from netsprt.hypothesis import ContaminationModel, GaussianBinaryTest, llr_moments
from netsprt.montecarlo import (
    CSV_COLUMNS,
    ConfigError,
    DetectionCfg,
    ExecutionCfg,
    ExperimentConfig,
    NetworkCfg,
    collect_statistic_snapshots,
    config_from_json,
    metrics_to_csv,
    run_experiment,
)

S1 = GaussianBinaryTest.shift_in_mean(-1.0, 1.0, 2.0)
S2 = GaussianBinaryTest.shift_in_variance(4.0, 1.0)
CLEAN = ContaminationModel(epsilon=0.0)


def small_cfg(**kw):
    defaults = dict(
        test=S1,
        contamination=CLEAN,
        network=NetworkCfg(n=8, radius=0.7),
        detection=DetectionCfg(variants=("plain",), budgets=((0.05, 0.05),)),
        execution=ExecutionCfg(n_runs=50, seed=3, hypotheses=(1,), chunk_size=16),
    )
    defaults.update(kw)
    return ExperimentConfig(**defaults)


class TestConfigValidation:
    def test_zero_runs_rejected(self):
        with pytest.raises(ConfigError, match="n_runs"):
            small_cfg(execution=ExecutionCfg(n_runs=0, seed=1))

    def test_budget_range(self):
        with pytest.raises(ConfigError, match="budgets"):
            small_cfg(detection=DetectionCfg(variants=("plain",), budgets=((0.0, 0.5),)))

    def test_unknown_variant(self):
        with pytest.raises(ConfigError, match="unknown variant"):
            small_cfg(detection=DetectionCfg(variants=("wavelet",)))

    def test_median_variance_test_rejected_with_rule(self):
        with pytest.raises(ConfigError, match="skewed"):
            small_cfg(test=S2, detection=DetectionCfg(variants=("median",)))

    def test_median_variance_test_override(self):
        cfg = small_cfg(
            test=S2,
            detection=DetectionCfg(variants=("median",), allow_median_for_skewed_llr=True),
        )
        assert cfg.detection.variants == ("median",)

    def test_bad_hypothesis(self):
        with pytest.raises(ConfigError, match="hypotheses"):
            small_cfg(execution=ExecutionCfg(n_runs=5, seed=1, hypotheses=(2,)))


class TestRunExperiment:
    def test_row_structure_and_budget(self):
        cfg = small_cfg(
            detection=DetectionCfg(
                variants=("plain", "mean"), budgets=((0.05, 0.05), (0.01, 0.01))
            ),
            execution=ExecutionCfg(n_runs=100, seed=5, hypotheses=(0, 1), chunk_size=32),
        )
        rows = run_experiment(cfg)
        assert len(rows) == 2 * 2 * 2
        for r in rows:
            assert r.scenario == "shift_in_mean"
            assert r.truncated == 0
            assert r.arl >= 1.0
            assert r.err_emp <= r.alpha  # clean noise, conservative thresholds

    def test_arl_decreases_as_budgets_loosen(self):
        cfg = small_cfg(
            detection=DetectionCfg(
                variants=("plain", "lfd", "median", "huber", "myriad"),
                budgets=((0.001, 0.001), (0.01, 0.01), (0.1, 0.1)),
            ),
            contamination=ContaminationModel(epsilon=0.05),
            execution=ExecutionCfg(n_runs=60, seed=5, hypotheses=(1,), chunk_size=32),
        )
        rows = run_experiment(cfg)
        by_variant = {}
        for r in rows:
            by_variant.setdefault(r.variant, []).append((r.alpha, r.arl))
        for variant, series in by_variant.items():
            series.sort()
            arls = [a for _, a in series]
            assert arls[0] >= arls[1] >= arls[2], (variant, arls)

    def test_same_seed_reproduces_csv_bytes(self):
        cfg = small_cfg()
        a = metrics_to_csv(run_experiment(cfg))
        b = metrics_to_csv(run_experiment(cfg))
        assert a == b

    def test_seed_changes_results(self):
        from netsprt.montecarlo import with_seed

        cfg = small_cfg()
        a = metrics_to_csv(run_experiment(cfg))
        b = metrics_to_csv(run_experiment(with_seed(cfg, 4)))
        assert a != b

    def test_parallel_matches_serial_bytes(self):
        base = dict(
            test=S1,
            contamination=ContaminationModel(epsilon=0.1),
            network=NetworkCfg(n=10, radius=0.7),
            detection=DetectionCfg(variants=("plain", "median"), budgets=((0.01, 0.01),)),
        )
        serial = ExperimentConfig(
            **base,
            execution=ExecutionCfg(n_runs=80, seed=11, hypotheses=(0, 1), chunk_size=20),
        )
        parallel = ExperimentConfig(
            **base,
            execution=ExecutionCfg(
                n_runs=80, seed=11, hypotheses=(0, 1), chunk_size=20, parallel=True, workers=2
            ),
        )
        assert metrics_to_csv(run_experiment(serial)) == metrics_to_csv(run_experiment(parallel))

    def test_fixed_topology(self):
        cfg = small_cfg(
            network=NetworkCfg(n=3, edges=((0, 1), (1, 2))),
            execution=ExecutionCfg(n_runs=30, seed=2, hypotheses=(1,)),
        )
        rows = run_experiment(cfg)
        assert rows[0].arl >= 1.0

    def test_truncation_counted_and_warned(self):
        # a one-step cap truncates some pairs; they are excluded from the
        # ARL (decided pairs only) and reported with a warning
        cfg = small_cfg(
            detection=DetectionCfg(
                variants=("plain",),
                budgets=((0.001, 0.001),),
                threshold_method="closed_form",
            ),
            execution=ExecutionCfg(n_runs=40, seed=3, hypotheses=(1,), t_max=1),
        )
        with pytest.warns(RuntimeWarning, match="undecided"):
            rows = run_experiment(cfg)
        r = rows[0]
        assert r.truncated > 0
        assert r.truncated + r.decided_pairs == 40 * 8
        if r.decided_pairs:
            assert r.arl == 1.0

    def test_per_run_topology_mode(self):
        cfg = small_cfg(
            network=NetworkCfg(n=6, radius=0.8, per_run=True),
            execution=ExecutionCfg(n_runs=12, seed=9, hypotheses=(1,)),
        )
        rows = run_experiment(cfg)
        assert rows[0].decided_pairs == 12 * 6
        again = run_experiment(cfg)
        assert metrics_to_csv(rows) == metrics_to_csv(again)


class TestEngineParity:
    @pytest.mark.parametrize("variant_name", ["plain", "lfd", "huber"])
    def test_batched_engine_matches_single_run_detector(self, variant_name):
        # replay each run's measurement stream through the reference
        # state machine and compare stop times and decisions
        from netsprt._engine import SimSpec, simulate_runs
        from netsprt.detector import NetworkDetector, Variant
        from netsprt.hypothesis import TrueState, sample_measurement
        from netsprt.lfd import clipped_llr, solve_lfd_eps
        from netsprt.montecarlo import SEED_RUN
        from netsprt.network import equal_weight_matrix, generate_geometric_graph
        from netsprt.thresholds import Thresholds
        from netsprt.hypothesis import llr

        seed, n_runs, block = 13, 25, 16
        graph = generate_geometric_graph(9, 0.6, np.random.default_rng(seed))
        w = equal_weight_matrix(graph)
        indptr, indices = graph.closed_neighborhoods()
        cm = ContaminationModel(epsilon=0.1, kappa=10.0)
        thr = Thresholds(-6.0, 6.0)
        clip = solve_lfd_eps(S1, 0.1) if variant_name == "lfd" else None
        variant = {
            "plain": Variant.plain,
            "lfd": lambda: Variant.lfd(clip),
            "huber": lambda: Variant.estimator("huber", S1),
        }[variant_name]()
        spec = SimSpec(
            test=S1,
            contamination=cm,
            hypothesis=1,
            w=w.w,
            indptr=indptr,
            indices=indices,
            variant=variant,
            thresholds=thr,
            t_max=500,
            block=block,
        )
        entropies = [(seed, SEED_RUN, r) for r in range(n_runs)]
        stop_t, decision = simulate_runs(spec, entropies)

        state = TrueState(S1, 1)
        for r in range(n_runs):
            gen = np.random.default_rng(np.random.SeedSequence(entropies[r]))
            blocks = []

            def source(t):
                while len(blocks) * block < t:
                    blocks.append(sample_measurement(state, cm, gen, size=(block, 9)))
                y = blocks[(t - 1) // block][(t - 1) % block]
                if variant_name == "lfd":
                    return np.asarray(clipped_llr(clip, S1, y))
                return np.asarray(llr(S1, y))

            det = NetworkDetector(graph, w, thr, variant)
            records = det.run_until_all_stop(source, t_max=500)
            for rec in records:
                assert not rec.truncated
                assert rec.stopping_time == stop_t[r, rec.node]
                assert rec.decision == decision[r, rec.node]


class TestSnapshots:
    def test_empty_times(self):
        assert collect_statistic_snapshots(small_cfg(), []) == {}

    def test_first_step_mean_tracks_llr_mean(self):
        cfg = small_cfg(
            execution=ExecutionCfg(n_runs=4000, seed=6, hypotheses=(1,), chunk_size=1000)
        )
        snaps = collect_statistic_snapshots(cfg, [1, 3])
        mom = llr_moments(S1)
        for t, block in snaps.items():
            assert block.shape == (4000, 8)
            per_run = block.mean(axis=1)
            se = per_run.std(ddof=1) / np.sqrt(len(per_run))
            assert per_run.mean() == pytest.approx(mom.mean1 * t, abs=4 * se)

    def test_lfd_statistic_obeys_band_bound(self):
        # each consensus average of band-clamped innovations moves the
        # statistic by at most the band edges, so |S| <= t * max(|C0|, C1)
        cfg = small_cfg(
            contamination=ContaminationModel(epsilon=0.1),
            detection=DetectionCfg(variants=("lfd",), budgets=((0.05, 0.05),)),
            execution=ExecutionCfg(n_runs=200, seed=8, hypotheses=(0,), chunk_size=64),
        )
        from netsprt.lfd import solve_lfd_eps

        clip = solve_lfd_eps(S1, 0.1)
        snaps = collect_statistic_snapshots(cfg, [1, 2, 5, 9])
        for t, block in snaps.items():
            assert block.max() <= t * clip.upper + 1e-9
            assert block.min() >= t * clip.lower - 1e-9


class TestCsv:
    def test_columns_and_rows(self, tmp_path):
        cfg = small_cfg()
        rows = run_experiment(cfg)
        path = tmp_path / "out.csv"
        text = metrics_to_csv(rows, path)
        assert path.read_text() == text
        lines = text.strip().split("\n")
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == 1 + len(rows)


class TestJsonConfig:
    GOOD = {
        "scenario": {"kind": "shift_in_mean", "mu0": -1, "mu1": 1, "sigma2": 2},
        "noise": {"epsilon": 0.1, "kappa": 10.0},
        "network": {"n": 8, "radius": 0.7},
        "detection": {"variants": ["plain", "lfd"], "alphas": [0.01, 0.1]},
        "execution": {"n_runs": 10, "seed": 1},
    }

    def test_parses(self):
        cfg = config_from_json(self.GOOD)
        assert cfg.test == S1
        assert cfg.detection.budgets == ((0.01, 0.01), (0.1, 0.1))
        assert cfg.execution.hypotheses == (0, 1)

    def test_missing_key_names_path(self):
        doc = {k: v for k, v in self.GOOD.items() if k != "noise"}
        with pytest.raises(ConfigError, match=r"\$\.noise"):
            config_from_json(doc)
        doc = dict(self.GOOD, scenario={"kind": "shift_in_mean", "mu0": -1, "mu1": 1})
        with pytest.raises(ConfigError, match="scenario.sigma2"):
            config_from_json(doc)

    def test_invalid_json_text(self):
        with pytest.raises(ConfigError, match="invalid JSON"):
            config_from_json("{nope")

    def test_variance_scenario_and_budget_pairs(self):
        doc = dict(
            self.GOOD,
            scenario={"kind": "shift_in_variance", "sigma_x2": 4, "sigma_n2": 1},
            detection={"variants": ["plain"], "budgets": [[0.001, 0.01]]},
        )
        cfg = config_from_json(doc)
        assert cfg.test == S2
        assert cfg.detection.budgets == ((0.001, 0.01),)
