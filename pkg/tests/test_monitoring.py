import sys

import numpy as np
import pytest

from genmetric import (
    ActivationSet,
    ExternalError,
    FormatError,
    MonitorConfig,
    MonitorState,
    SequenceError,
    StateError,
    TuningError,
    TuningGrid,
    ValidationError,
    grid_search,
    monitor_update,
    parse_grid_file,
    run_external_evaluation,
    save_activations,
)
from genmetric.monitoring import render_command


def replay_stop_epoch(history, epsilon, patience, min_epochs):
    """Brute-force reading of the stop rule, independent of MonitorState."""
    streak = 0
    for idx in range(len(history)):
        epoch, value = history[idx]
        if idx > 0 and epoch >= min_epochs and abs(value - history[idx - 1][1]) < epsilon:
            streak += 1
        else:
            streak = 0
        if streak >= patience:
            return epoch
    return None


def feed(history, config):
    state = MonitorState()
    for epoch, value in history:
        state = monitor_update(state, config, epoch, value)
        if state.stopped:
            break
    return state


class TestMonitorUpdate:
    def test_large_change_keeps_running(self):
        config = MonitorConfig(epsilon=1e-3)
        state = feed([(1, 100.0), (2, 50.0)], config)
        assert not state.stopped
        assert state.qualifying_streak == 0

    def test_small_change_stops_with_patience_one(self):
        config = MonitorConfig(epsilon=1e-3, patience=1)
        state = feed([(1, 100.0), (2, 50.0), (3, 49.9995)], config)
        assert state.stopped
        assert state.stop_epoch == 3

    def test_patience_two_needs_second_qualifier(self):
        config = MonitorConfig(epsilon=1e-3, patience=2)
        state = feed([(1, 100.0), (2, 50.0), (3, 49.9995)], config)
        assert not state.stopped
        state = monitor_update(state, config, 4, 49.9994)
        assert state.stopped and state.stop_epoch == 4

    def test_never_stops_before_min_epochs(self):
        config = MonitorConfig(epsilon=100.0, patience=1, min_epochs=3)
        state = feed([(1, 5.0), (2, 5.0)], config)
        assert not state.stopped
        state = monitor_update(state, config, 3, 5.0)
        assert state.stopped and state.stop_epoch == 3

    def test_streak_resets_on_large_change(self):
        config = MonitorConfig(epsilon=1.0, patience=2)
        state = feed([(1, 10.0), (2, 9.9), (3, 5.0), (4, 4.9)], config)
        assert not state.stopped
        assert state.qualifying_streak == 1

    def test_out_of_order_epoch(self):
        config = MonitorConfig()
        state = feed([(1, 10.0), (2, 9.0)], config)
        with pytest.raises(SequenceError):
            monitor_update(state, config, 2, 8.0)

    def test_update_after_stop(self):
        config = MonitorConfig(epsilon=10.0, patience=1)
        state = feed([(1, 5.0), (2, 5.0)], config)
        assert state.stopped
        with pytest.raises(StateError):
            monitor_update(state, config, 3, 5.0)

    def test_rejects_bad_score(self):
        config = MonitorConfig()
        with pytest.raises(ValidationError):
            monitor_update(MonitorState(), config, 1, float("nan"))
        with pytest.raises(ValidationError):
            monitor_update(MonitorState(), config, 1, -0.5)

    def test_matches_brute_force_replay(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            length = int(rng.integers(1, 14))
            epochs = np.cumsum(rng.integers(1, 3, size=length))
            values = np.round(rng.uniform(0.0, 4.0, size=length), 2)
            history = list(zip((int(e) for e in epochs), map(float, values)))
            epsilon = float(rng.uniform(0.05, 1.5))
            patience = int(rng.integers(1, 4))
            min_epochs = int(rng.integers(2, 5))
            config = MonitorConfig(epsilon=epsilon, patience=patience, min_epochs=min_epochs)
            state = feed(history, config)
            want = replay_stop_epoch(history, epsilon, patience, min_epochs)
            assert state.stop_epoch == want
            assert state.stopped == (want is not None)
            if want is not None:
                assert want >= 2


class TestTuningGrid:
    def test_lexicographic_order(self):
        grid = TuningGrid(parameters=(("a", (1, 2)), ("b", ("x", "y", "z"))))
        pts = list(grid.points())
        assert pts[0] == {"a": 1, "b": "x"}
        assert pts[1] == {"a": 1, "b": "y"}
        assert pts[-1] == {"a": 2, "b": "z"}
        assert grid.size == 6 == len(pts)

    def test_duplicate_names_rejected(self):
        with pytest.raises(ValidationError):
            TuningGrid(parameters=(("a", (1,)), ("a", (2,))))

    def test_empty_candidates_rejected(self):
        with pytest.raises(ValidationError):
            TuningGrid(parameters=(("a", ()),))


class TestGridSearch:
    def test_singleton_grid(self):
        grid = TuningGrid(parameters=(("a", (7,)),))
        result = grid_search(grid, lambda p: 5.0)
        assert result.best_lfid == 5.0
        assert result.best_params == (("a", 7),)
        assert result.trace[0].kept is True

    def test_tie_keeps_earlier(self):
        grid = TuningGrid(parameters=(("a", (1, 2)),))
        result = grid_search(grid, lambda p: 5.0)
        assert [t.kept for t in result.trace] == [True, False]
        assert result.best_params == (("a", 1),)

    def test_constant_evaluator_keeps_only_first(self):
        grid = TuningGrid(parameters=(("a", (1, 2, 3)), ("b", (1, 2)),))
        result = grid_search(grid, lambda p: 1.0)
        assert sum(t.kept for t in result.trace) == 1
        assert result.trace[0].kept

    def test_known_function_matches_exhaustive_scan(self):
        grid = TuningGrid(parameters=(("a", (1, 2)), ("b", (10, 20, 30))))
        fn = lambda p: (p["a"] - 2) ** 2 + (p["b"] - 20) ** 2 / 100.0
        result = grid_search(grid, fn)
        want_best = min(grid.points(), key=lambda p: fn(p))
        assert dict(result.best_params) == want_best
        assert result.best_lfid == fn(want_best)

    def test_kept_flags_match_running_minimum_replay(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n_params = int(rng.integers(1, 4))
            params = tuple(
                (f"p{i}", tuple(int(v) for v in rng.integers(0, 10, size=rng.integers(1, 4))))
                for i in range(n_params)
            )
            grid = TuningGrid(parameters=params)
            table = {
                tuple(sorted(pt.items())): float(rng.uniform(0, 10))
                for pt in grid.points()
            }
            evaluator = lambda p: table[tuple(sorted(p.items()))]
            result = grid_search(grid, evaluator)
            assert len(result.trace) == grid.size

            best = None
            for point, trace in zip(grid.points(), result.trace):
                value = evaluator(point)
                kept = best is None or value < best
                if kept:
                    best = value
                assert trace.params == point
                assert trace.lfid == value
                assert trace.kept == kept
            assert result.best_lfid == best

    def test_failures_skipped_with_record(self):
        grid = TuningGrid(parameters=(("a", (1, 2, 3)),))

        def evaluator(p):
            if p["a"] == 2:
                raise ExternalError("boom")
            return float(p["a"])

        result = grid_search(grid, evaluator)
        assert len(result.trace) == 2
        assert len(result.failures) == 1
        assert result.best_lfid == 1.0

    def test_all_failed_raises(self):
        grid = TuningGrid(parameters=(("a", (1, 2)),))

        def evaluator(p):
            raise ExternalError("nope")

        with pytest.raises(TuningError):
            grid_search(grid, evaluator)

    def test_parallel_jobs_fold_in_order(self):
        grid = TuningGrid(parameters=(("a", tuple(range(12))),))
        fn = lambda p: float((p["a"] * 7) % 5)
        serial = grid_search(grid, fn, jobs=1)
        parallel = grid_search(grid, fn, jobs=4)
        assert [t.kept for t in serial.trace] == [t.kept for t in parallel.trace]
        assert serial.best_params == parallel.best_params


class TestGridFile:
    def test_parse_basic(self, tmp_path):
        path = tmp_path / "grid.txt"
        path.write_text(
            "# sweep\nlatent_dim = 2, 4, 8\noptimizer_type = adam, sgd\nbatch_size = 16\n"
        )
        grid = parse_grid_file(path)
        assert grid.parameters == (
            ("latent_dim", (2, 4, 8)),
            ("optimizer_type", ("adam", "sgd")),
            ("batch_size", (16,)),
        )

    def test_rejects_missing_equals(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("latent_dim 2, 4\n")
        with pytest.raises(FormatError):
            parse_grid_file(path)

    def test_rejects_empty_file(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("# nothing\n")
        with pytest.raises(FormatError):
            parse_grid_file(path)


class TestExternalEvaluation:
    def _real_acts(self, tmp_path):
        rng = np.random.default_rng(2)
        acts = ActivationSet(rng.normal(size=(64, 2)), source_tag="real")
        path = tmp_path / "real.actb"
        save_activations(acts, path)
        return path

    def test_template_rendering(self):
        argv = render_command(
            "gen --latent {param:latent_dim} --out {out}", {"latent_dim": 4}, "/tmp/x"
        )
        assert argv == ["gen", "--latent", "4", "--out", "/tmp/x"]

    def test_missing_out_placeholder(self):
        with pytest.raises(ValidationError):
            render_command("gen --latent {param:latent_dim}", {"latent_dim": 4}, "x")

    def test_unresolved_placeholder(self):
        with pytest.raises(ValidationError):
            render_command("gen {param:nope} {out}", {"latent_dim": 4}, "x")

    def test_bundled_toy_generator_end_to_end(self, tmp_path):
        real = self._real_acts(tmp_path)
        template = (
            f"{sys.executable} -m genmetric.cli toy-gen --no-timestamp "
            "--n 64 --dim 2 --seed 5 --latent-dim {param:latent_dim} --out {out}"
        )
        value = run_external_evaluation(template, {"latent_dim": 2}, real)
        assert np.isfinite(value) and value >= 0

    def test_failing_command_raises_external(self, tmp_path):
        real = self._real_acts(tmp_path)
        template = f"{sys.executable} -c 'import sys; sys.exit(1)' {{out}}"
        with pytest.raises(ExternalError):
            run_external_evaluation(template, {}, real)

    def test_command_without_output_file(self, tmp_path):
        real = self._real_acts(tmp_path)
        template = f"{sys.executable} -c 'pass' {{out}}"
        with pytest.raises(FormatError):
            run_external_evaluation(template, {}, real)

    def test_fixed_seed_is_deterministic(self, tmp_path):
        real = self._real_acts(tmp_path)
        template = (
            f"{sys.executable} -m genmetric.cli toy-gen --no-timestamp "
            "--n 64 --dim 2 --seed 9 --latent-dim {param:latent_dim} --out {out}"
        )
        first = run_external_evaluation(template, {"latent_dim": 3}, real)
        second = run_external_evaluation(template, {"latent_dim": 3}, real)
        assert first == second
