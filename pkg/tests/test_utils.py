import json

import numpy as np
import pandas as pd
import pytest

from src.utils.config import config, dict_to_namespace, env_int
from src.utils.file_utils import load_csv, save_to_csv, save_to_json, to_jsonable
from src.utils.output_formatter import OutputFormatter


class TestConfig:

    def test_namespace_access(self):
        ns = dict_to_namespace({"audit": {"rel_tol": 1e-12}})
        assert ns.audit.rel_tol == 1e-12

    def test_bundled_settings(self):
        assert config.audit.absolute_floor == 1e-6
        assert config.defaults["wage"] == 30.0
        assert "fig2_steady_state" in config.presets
        assert config.jobs >= 1

    @pytest.mark.parametrize("raw, expected", [("", 4), ("0", 4), ("3", 3)])
    def test_env_int(self, monkeypatch, raw, expected):
        monkeypatch.setenv("SFC_ABM_TEST_JOBS", raw)
        assert env_int("SFC_ABM_TEST_JOBS", 4) == expected

    def test_env_int_rejects_text(self, monkeypatch):
        monkeypatch.setenv("SFC_ABM_TEST_JOBS", "many")
        with pytest.raises(ValueError):
            env_int("SFC_ABM_TEST_JOBS", 1)


class TestFiles:

    def test_jsonable_values(self):
        data = {"a": np.int64(3), "b": np.float64("nan"), "c": np.array([1.5, np.inf]), 4: np.bool_(True)}
        assert to_jsonable(data) == {"a": 3, "b": None, "c": [1.5, None], "4": True}

    def test_json_is_sorted_and_stable(self, tmp_path):
        path = tmp_path / "out" / "summary.json"
        assert save_to_json({"b": 1, "a": float("inf")}, path)
        text = path.read_text(encoding="utf-8")
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text) == {"a": None, "b": 1}
        assert text.endswith("}\n")

    def test_csv_floats_round_trip_exactly(self, tmp_path):
        values = [0.1 + 0.2, 1 / 3, 2.0 ** -40, 123456.789]
        path = tmp_path / "values.csv"
        assert save_to_csv(pd.DataFrame({"x": values, "n": [1, 2, 3, 4]}), path)
        frame = load_csv(path)
        assert frame["x"].tolist() == values
        assert frame["n"].tolist() == [1, 2, 3, 4]


class TestFormatter:

    def test_quiet_keeps_errors(self, capsys):
        out = OutputFormatter(quiet=True)
        out.print_info("hidden")
        out.print_error("shown")
        captured = capsys.readouterr().out
        assert "hidden" not in captured and "shown" in captured

    def test_progress_line(self, capsys):
        OutputFormatter().print_progress(5, 100, 0.1, 420, 12345.6)
        line = capsys.readouterr().out
        assert "t=  5/100" in line and "10.00%" in line and "12,346" in line
