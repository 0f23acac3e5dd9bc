from __future__ import annotations

import datetime as dt

import pytest

from ecoscapes.config import Config, dump_config, load_config
from ecoscapes.errors import (
    MissingTokenError,
    OutOfRangeValueError,
    UnknownKeyError,
)


class TestDefaults:
    def test_absent_file_is_all_defaults(self):
        config = load_config(None, env={})
        assert config.bbox_side_m == 5000.0
        assert config.max_cloud == 0.01
        assert config.max_side == 1024
        assert config.backend == "stub"
        assert config.manual_root == "satellite_data"
        assert config.temperature == 0.0

    def test_empty_file_is_all_defaults(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        config = load_config(path, env={})
        assert config == load_config(None, env={})

    def test_half_width_derives_from_side(self):
        assert Config().bbox_half_width_m == 2500.0


class TestValidation:
    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("max_clouds: 0.5\n")
        with pytest.raises(UnknownKeyError) as exc:
            load_config(path, env={})
        assert "max_clouds" in str(exc.value)

    def test_max_cloud_out_of_range(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("max_cloud: 1.5\n")
        with pytest.raises(OutOfRangeValueError):
            load_config(path, env={})

    @pytest.mark.parametrize("line", [
        "bbox_side_m: 0",
        "water_threshold: 300",
        "water_min_area_fraction: 1.0",
        "max_side: 0",
        "backend: local",
        "temperature: -1",
    ])
    def test_other_ranges(self, tmp_path, line):
        path = tmp_path / "c.yaml"
        path.write_text(line + "\n")
        with pytest.raises(OutOfRangeValueError):
            load_config(path, env={})

    def test_non_mapping_root_rejected(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("- just\n- a list\n")
        with pytest.raises(UnknownKeyError):
            load_config(path, env={})

    def test_reference_date_parsed(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("reference_date: '2024-12-31'\n")
        assert load_config(path, env={}).reference_date == dt.date(2024, 12, 31)

    def test_bad_reference_date(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("reference_date: 'yesterday'\n")
        with pytest.raises(OutOfRangeValueError):
            load_config(path, env={})


class TestTokens:
    def test_stub_backend_needs_no_token(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("backend: stub\n")
        assert load_config(path, env={}).backend == "stub"

    def test_remote_backend_without_token_rejected(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("backend: remote\nchat_api_url: http://chat\n")
        with pytest.raises(MissingTokenError):
            load_config(path, env={})

    def test_remote_backend_with_env_token(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("backend: remote\nchat_api_url: http://chat\n")
        config = load_config(path, env={"ECOSCAPES_API_TOKEN": "tok"})
        assert config.resolve_token({"ECOSCAPES_API_TOKEN": "tok"}) == "tok"

    def test_literal_token_wins_over_env(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("api_token: literal\n")
        config = load_config(path, env={"ECOSCAPES_API_TOKEN": "env"})
        assert config.resolve_token({"ECOSCAPES_API_TOKEN": "env"}) == "literal"

    def test_custom_token_env_name(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("api_token_env: MY_TOKEN\n")
        config = load_config(path, env={})
        assert config.resolve_token({"MY_TOKEN": "x"}) == "x"


class TestRoundTrip:
    def test_serialize_load_is_stable(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text(
            "max_cloud: 0.02\nbbox_side_m: 8000\n"
            "reference_date: '2024-06-01'\nrgb_model: vision-x\n")
        config = load_config(path, env={})
        dumped = tmp_path / "dumped.yaml"
        dumped.write_text(dump_config(config))
        again = load_config(dumped, env={})
        assert again == config
        assert dump_config(again) == dump_config(config)
