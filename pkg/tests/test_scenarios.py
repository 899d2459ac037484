import json
import pickle
from pathlib import Path

import pytest

from src.core.ledger import AuditError
from src.core.params import ParameterError
from src.core.run import run_scenario, run_sweep, simulate_seed, steady_state_stats
from src.core.scenario import (
    ConfigError,
    FirmTracking,
    config_from_dict,
    list_presets,
    load_config,
    parse_override,
    preset,
)
from src.core.state import Economy
from src.services.cross_section import (
    CROSS_SECTION_COLUMNS, GROWTH_COLUMNS, TIMESERIES_COLUMNS, TRAJECTORY_COLUMNS,
)
from src.utils.file_utils import load_csv


class TestLoadConfig:

    def test_defaults_filled(self, small_document):
        for key in ("burn_in", "snapshot_times", "seeds", "output_dir"):
            small_document.pop(key)
        small_document["iterations"] = 600
        scenario = load_config(json.dumps(small_document))
        assert scenario.burn_in == 500
        assert scenario.snapshot_times == []
        assert scenario.params.wage == 30.0
        assert scenario.params.price == 1.0
        assert scenario.params.gamma == 2.0
        assert scenario.growth_lag == 1
        assert scenario.seeds == [1]
        assert scenario.params.debt_cap == 30.0

    def test_burn_in_default_must_fit(self, small_document):
        small_document.pop("burn_in")
        with pytest.raises(ParameterError) as err:
            load_config(json.dumps(small_document))
        assert err.value.key == "burn_in"

    def test_mu_order_names_mu_min(self, small_document):
        small_document.update(mu_min=0.2, mu_max=0.1)
        with pytest.raises(ParameterError) as err:
            load_config(json.dumps(small_document))
        assert err.value.key == "mu_min"

    def test_unknown_key_suggests_name(self, small_document):
        small_document["interest"] = 0.02
        with pytest.raises(ConfigError) as err:
            load_config(json.dumps(small_document))
        assert err.value.key == "interest"
        assert "interest_rate" in str(err.value)

    def test_missing_required_key(self, small_document):
        small_document.pop("nu")
        with pytest.raises(ConfigError) as err:
            load_config(json.dumps(small_document))
        assert err.value.key == "nu"

    def test_schema_violation_names_key(self, small_document):
        small_document["n_workers"] = "many"
        with pytest.raises(ConfigError) as err:
            load_config(json.dumps(small_document))
        assert err.value.key == "n_workers"

    def test_parse_error_has_line(self):
        with pytest.raises(ConfigError) as err:
            load_config('{\n  "n_workers": 10,\n}')
        assert err.value.line == 3
        assert "line 3" in str(err.value)

    def test_error_survives_pickling(self):
        err = pickle.loads(pickle.dumps(ConfigError("unknown key 'gama'", key="gama", line=3)))
        assert isinstance(err, ConfigError)
        assert (str(err), err.key, err.line) == ("unknown key 'gama'", "gama", 3)

    def test_document_must_be_object(self):
        with pytest.raises(ConfigError):
            load_config("[1, 2]")

    def test_seed_shorthand(self, small_document):
        small_document.pop("seeds")
        small_document["seed"] = 5
        assert load_config(json.dumps(small_document)).seeds == [5]

    def test_seed_and_seeds_conflict(self, small_document):
        small_document["seed"] = 5
        with pytest.raises(ConfigError):
            load_config(json.dumps(small_document))

    def test_override_seeds_replaces_seed(self, small_document):
        small_document.pop("seeds")
        small_document["seed"] = 5
        scenario = load_config(json.dumps(small_document), {"seeds": [7, 8]})
        assert scenario.seeds == [7, 8]
        assert scenario.params_for(8).seed == 8

    def test_document_round_trip(self, small_document):
        scenario = config_from_dict(small_document)
        again = config_from_dict(scenario.to_document())
        assert again == scenario
        assert scenario.with_overrides({"gamma": 3.0}).params.gamma == 3.0

    def test_snapshot_outside_run_rejected(self, small_document):
        small_document["snapshot_times"] = [80]
        with pytest.raises(ParameterError) as err:
            config_from_dict(small_document)
        assert err.value.key == "snapshot_times"


class TestPresets:

    def test_figure_parameters(self):
        fig2 = preset("fig2_steady_state")
        assert fig2.params.interest_rate == 0.011
        assert fig2.params.n_workers == 10000 and fig2.params.nu == 8
        assert fig2.params.iterations == 2000
        fig3 = preset("fig3_distributions").params
        assert (fig3.n_workers, fig3.n_firms_init, fig3.nu) == (10000, 450, 8)
        assert fig3.interest_rate == 0.0075 and fig3.margin_headroom > 0
        assert 750 in preset("fig3_distributions").snapshot_times
        narrow = preset("fig4b_narrow_mu")
        assert (narrow.params.mu_min, narrow.params.mu_max) == (0.025, 0.075)
        assert preset("fig4a_wide_mu").params.n_workers == 100000

    def test_listing(self):
        names = [name for name, _ in list_presets()]
        assert names == ["fig2_steady_state", "fig3_distributions", "fig4a_wide_mu", "fig4b_narrow_mu"]

    def test_unknown_preset(self):
        with pytest.raises(ConfigError) as err:
            preset("fig2_steady")
        assert "fig2_steady_state" in str(err.value)

    def test_override(self):
        scenario = preset("fig2_steady_state", {"interest_rate": 0.02, "seeds": [3]})
        assert scenario.params.interest_rate == 0.02
        assert scenario.seeds == [3]
        assert scenario.name == "fig2_steady_state"

    @pytest.mark.parametrize("item, expected", [
        ("interest_rate=0.02", ("interest_rate", 0.02)),
        ("nu=4", ("nu", 4)),
        ("loan_mode=literal", ("loan_mode", "literal")),
        ("snapshot_times=[10, 20]", ("snapshot_times", [10, 20])),
    ])
    def test_parse_override(self, item, expected):
        assert parse_override(item) == expected

    def test_parse_override_needs_equals(self):
        with pytest.raises(ConfigError):
            parse_override("interest_rate")


class TestFirmTracking:

    def test_defaults_track_nothing(self, small_document):
        scenario = config_from_dict(small_document)
        assert not scenario.track_firms.enabled
        assert scenario.to_document()["track_firms"] == {"ids": [], "born_at": []}

    def test_partial_object_and_round_trip(self, small_document):
        small_document["track_firms"] = {"ids": [5, 3, 5]}
        scenario = config_from_dict(small_document)
        assert scenario.track_firms == FirmTracking(ids=[3, 5])
        assert scenario.track_firms.matches(3, 0) and not scenario.track_firms.matches(4, 0)
        assert config_from_dict(scenario.to_document()).track_firms == scenario.track_firms

    def test_unknown_field_rejected(self, small_document):
        small_document["track_firms"] = {"names": [1]}
        with pytest.raises(ConfigError) as err:
            config_from_dict(small_document)
        assert err.value.key == "track_firms"

    def test_birth_after_run_rejected(self, small_document):
        small_document["track_firms"] = {"born_at": [81]}
        with pytest.raises(ParameterError) as err:
            config_from_dict(small_document)
        assert err.value.key == "track_firms"

    def test_trajectory_ends_at_failure(self, small_document):
        small_document.update(interest_rate=0.075, iterations=60, burn_in=10, snapshot_times=[],
                              seeds=[1], track_firms={"born_at": [0]})
        scenario = config_from_dict(small_document)
        result = simulate_seed(scenario, 1)
        frame = result.trajectory_frame()
        assert list(frame.columns) == TRAJECTORY_COLUMNS
        assert set(frame["id"]) == set(range(60))
        failed = {f.id: f.t for f in result.failures if f.id < 60}
        assert failed
        for firm_id, rows in frame.groupby("id"):
            ts = rows["t"].tolist()
            assert ts == list(range(ts[0], ts[-1] + 1))
            assert ts[-1] == failed.get(firm_id, ts[-1])
            if firm_id in failed:
                record = next(f for f in result.failures if f.id == firm_id)
                assert rows["debt"].iloc[-1] == record.debt
                assert rows["size"].iloc[-1] == record.size

    def test_entrants_tracked_by_birth(self, small_document):
        small_document.update(iterations=40, burn_in=10, snapshot_times=[], seeds=[1],
                              track_firms={"born_at": [5]})
        scenario = config_from_dict(small_document)
        frame = simulate_seed(scenario, 1).trajectory_frame()
        assert set(frame["id"]) <= set(range(60 + 2 * 4, 60 + 2 * 5))
        assert frame["t"].min() >= 5

    def test_trajectory_file_written(self, small_document):
        small_document.update(seeds=[1], track_firms={"ids": [0, 1]})
        scenario = config_from_dict(small_document)
        run_scenario(scenario, jobs=1, quiet=True)
        frame = load_csv(Path(scenario.output_dir) / "trajectory_seed1.csv")
        assert list(frame.columns) == TRAJECTORY_COLUMNS
        assert set(frame["id"]) <= {0, 1}
        assert frame["t"].iloc[0] == 0


class TestRunScenario:

    def test_artifacts(self, small_document):
        scenario = config_from_dict(small_document)
        summary = run_scenario(scenario, jobs=1, quiet=True)
        out = Path(scenario.output_dir)
        for seed in (1, 2):
            frame = load_csv(out / f"timeseries_seed{seed}.csv")
            assert list(frame.columns) == TIMESERIES_COLUMNS
            assert len(frame) == 80
            assert frame["conservation_residual"].abs().max() <= 1e-6
            for t in (60, 79):
                cross = load_csv(out / f"cross_section_seed{seed}_t{t}.csv")
                assert list(cross.columns) == CROSS_SECTION_COLUMNS
            assert (out / f"failures_seed{seed}.csv").exists()
            growth = load_csv(out / f"growth_seed{seed}.csv")
            assert list(growth.columns) == GROWTH_COLUMNS
            assert growth["t"].min() >= 30
            assert not (out / f"trajectory_seed{seed}.csv").exists()
            assert (out / f"summary_seed{seed}.json").exists()
        assert summary["failed_seeds"] == []
        assert summary["scenario"]["interest_rate"] == 0.011
        assert summary["cross_seed"]["n_seeds"] == 2
        saved = json.loads((out / "summary.json").read_text(encoding="utf-8"))
        assert set(saved["seeds"]) == {"1", "2"}

    def test_rerun_is_byte_identical(self, small_document):
        scenario = config_from_dict(small_document)
        out = Path(scenario.output_dir)
        run_scenario(scenario, jobs=1, quiet=True)
        first = {p.name: p.read_bytes() for p in sorted(out.iterdir())}
        run_scenario(scenario, jobs=1, quiet=True)
        second = {p.name: p.read_bytes() for p in sorted(out.iterdir())}
        assert first == second

    def test_summary_matches_timeseries(self, small_document):
        scenario = config_from_dict(small_document)
        summary = run_scenario(scenario, jobs=1, quiet=True)
        out = Path(scenario.output_dir)
        for seed in (1, 2):
            recomputed = steady_state_stats(load_csv(out / f"timeseries_seed{seed}.csv"), scenario.burn_in)
            reported = summary["seeds"][str(seed)]["steady_state"]
            for key in ("unemployment_rate_mean", "n_active_firms_mean", "aggregate_debt_mean",
                        "unemployment_rate_var", "aggregate_debt_var"):
                assert recomputed[key] == pytest.approx(reported[key], rel=1e-9, abs=1e-12)

    def test_parallel_matches_sequential(self, small_document, tmp_path):
        sequential = config_from_dict({**small_document, "output_dir": str(tmp_path / "seq")})
        parallel = config_from_dict({**small_document, "output_dir": str(tmp_path / "par")})
        run_scenario(sequential, jobs=1, quiet=True)
        run_scenario(parallel, jobs=2, quiet=True)
        for seed in (1, 2):
            for name in (f"timeseries_seed{seed}.csv", f"summary_seed{seed}.json",
                         f"cross_section_seed{seed}_t79.csv", f"failures_seed{seed}.csv"):
                assert (tmp_path / "seq" / name).read_bytes() == (tmp_path / "par" / name).read_bytes()

    def test_adding_a_seed_keeps_others(self, small_document, tmp_path):
        one = config_from_dict({**small_document, "seeds": [2], "output_dir": str(tmp_path / "one")})
        two = config_from_dict({**small_document, "seeds": [1, 2], "output_dir": str(tmp_path / "two")})
        run_scenario(one, jobs=1, quiet=True)
        run_scenario(two, jobs=1, quiet=True)
        name = "timeseries_seed2.csv"
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()

    def test_audit_failure_leaves_diagnostic(self, small_document, monkeypatch):
        scenario = config_from_dict({**small_document, "seeds": [4]})
        monkeypatch.setattr(Economy, "conservation_residual", lambda self: 1.0)
        with pytest.raises(AuditError):
            run_scenario(scenario, jobs=1, quiet=True)
        out = Path(scenario.output_dir)
        diagnostic = json.loads((out / "diagnostic_seed4.json").read_text(encoding="utf-8"))
        assert diagnostic["audit"]["t"] == 0
        assert diagnostic["audit"]["ok"] is False
        summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
        assert summary["failed_seeds"] == [4]
        assert not (out / "timeseries_seed4.csv").exists()


class TestSweep:

    def test_gamma_sweep_tables(self, small_document):
        base = config_from_dict({**small_document, "seeds": [1]})
        means = run_sweep(base, "gamma", [1.0, 3.0], jobs=1, quiet=True)
        out = Path(base.output_dir)
        assert means["gamma"].tolist() == [1.0, 3.0]
        assert "aggregate_debt_mean" in means.columns
        table = load_csv(out / "sweep_gamma.csv")
        assert table[["gamma", "seed"]].values.tolist() == [[1.0, 1], [3.0, 1]]
        assert (out / "gamma_1.0" / "timeseries_seed1.csv").exists()
        assert (out / "sweep_gamma_means.csv").exists()

    def test_single_value_equals_plain_run(self, small_document, tmp_path):
        base = config_from_dict({**small_document, "seeds": [1], "output_dir": str(tmp_path / "sweep")})
        run_sweep(base, "nu", [2], jobs=1, quiet=True)
        plain = config_from_dict({**small_document, "seeds": [1], "output_dir": str(tmp_path / "plain")})
        run_scenario(plain, jobs=1, quiet=True)
        name = "timeseries_seed1.csv"
        assert (tmp_path / "sweep" / "nu_2" / name).read_bytes() == (tmp_path / "plain" / name).read_bytes()

    def test_rejects_non_sweepable_axis(self, small_document):
        base = config_from_dict(small_document)
        with pytest.raises(ConfigError):
            run_sweep(base, "wage", [20.0, 30.0], jobs=1, quiet=True)

    def test_rejects_empty_values(self, small_document):
        base = config_from_dict(small_document)
        with pytest.raises(ConfigError):
            run_sweep(base, "gamma", [], jobs=1, quiet=True)
