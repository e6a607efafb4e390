"""
Tests for the command-line interface and its exit codes.
"""

import os
from unittest.mock import patch

import pytest

from src.app import create_parser, main
from src.formats.sequence import write_sequence
from src.services.size_prior import Dimensions, write_dimension_table
from tests.conftest import read_csv


@pytest.fixture
def out_dir(tmp_path):
    return str(tmp_path / "out")


@pytest.fixture
def exact_manifest(tmp_path, exact_scene):
    """One exact frame with depth at half scale."""
    return write_sequence([exact_scene], str(tmp_path / "exact"), scale=0.5)


def _run(out_dir, *args):
    return main(["--preset", "testing", "--out-dir", out_dir, *args])


class TestParser:
    """Test argument parsing."""

    def test_commands_registered(self):
        parser = create_parser()
        args = parser.parse_args(["camheight", "a.toml", "b.toml", "--no-plot"])
        assert args.command == "camheight"
        assert args.manifests == ["a.toml", "b.toml"]
        assert args.no_plot is True

    def test_missing_command(self, capsys):
        assert main([]) == 1
        assert "❌" in capsys.readouterr().err

    def test_unknown_preset(self):
        assert main(["--preset", "nuscenes", "camheight", "m.toml"]) == 1

    def test_bad_mode(self, out_dir, exact_manifest):
        assert _run(out_dir, "--mode", "batch", "camheight", exact_manifest) == 1


class TestSimulateAndCamheight:
    """Test the simulate and camheight commands together."""

    @pytest.mark.integration
    def test_round_trip(self, out_dir, capsys):
        assert _run(out_dir, "--seed", "3", "simulate", "--frames", "3", "--scale", "0.5") == 0
        manifest = os.path.join(out_dir, "sim-00", "manifest.toml")
        assert os.path.exists(manifest)

        assert _run(out_dir, "--epochs", "2", "camheight", manifest) == 0
        output = capsys.readouterr().out
        assert "sim-00: H* =" in output
        assert len(read_csv(os.path.join(out_dir, "epochs.csv"))) == 2
        assert os.path.exists(os.path.join(out_dir, "h_star.svg"))

    def test_scene_from_config(self, tmp_path, out_dir):
        config = tmp_path / "scene.toml"
        config.write_text(
            "[scene]\ncamera_height = 1.8\npitch_deg = 1.0\nwidth = 320\nheight = 160\nfocal = 250.0\n"
        )
        assert _run(out_dir, "--config", str(config), "simulate", "--frames", "2", "--sequence-id", "cfg") == 0
        assert os.path.exists(os.path.join(out_dir, "cfg", "depth", "000001.pfm"))

    def test_resume_uses_configured_state_file(self, tmp_path, out_dir, exact_manifest):
        state_file = str(tmp_path / "state.jsonl")
        with patch("src.commands.camheight.Config.STATE_FILE", state_file):
            assert _run(out_dir, "--epochs", "1", "camheight", exact_manifest, "--resume", "--no-plot") == 0
        assert os.path.exists(state_file)

    def test_missing_manifest(self, tmp_path, out_dir, capsys):
        assert _run(out_dir, "camheight", str(tmp_path / "none.toml")) == 2
        assert "file not found" in capsys.readouterr().err


class TestLossesCommand:
    """Test the losses command."""

    def test_losses_csv(self, out_dir, exact_manifest):
        assert _run(out_dir, "losses", exact_manifest, "--epoch", "5", "--h-star", "1.25", "--gradient") == 0
        rows = read_csv(os.path.join(out_dir, "losses.csv"))
        assert rows[0]["status"] == "ok"
        assert float(rows[0]["L_cam"]) == pytest.approx(0.625, rel=0.02)
        assert float(rows[0]["d_log_scale"]) < 0

    def test_supervision_sources_are_exclusive(self, out_dir, exact_manifest):
        assert _run(out_dir, "losses", exact_manifest, "--h-star", "1.2", "--state-file", "s.jsonl") == 1


class TestRefineCommand:
    """Test the refine command."""

    def test_refine(self, out_dir, exact_manifest, capsys):
        assert _run(out_dir, "refine", exact_manifest, "--h-star", "1.25") == 0
        rows = read_csv(os.path.join(out_dir, "refine.csv"))
        assert rows[0]["step"] == "0"
        assert 1 < len(rows) <= 201
        assert "AbsRel 0.5000 -> 0.0" in capsys.readouterr().out

    def test_divergence_exit_code(self, tmp_path, out_dir, exact_manifest, capsys):
        config = tmp_path / "refine.toml"
        config.write_text("[refine]\npatience = 1\n")
        code = _run(out_dir, "--config", str(config), "refine", exact_manifest, "--h-star", "1.25", "--lr", "2.0")
        assert code == 3
        assert "recent_losses" in capsys.readouterr().err


class TestReportCommand:
    """Test the report command."""

    def test_nothing_requested(self, out_dir):
        assert _run(out_dir, "report") == 1

    def test_history(self, tmp_path, out_dir, exact_manifest, capsys):
        ledger = str(tmp_path / "runs.db")
        assert _run(out_dir, "--epochs", "3", "camheight", exact_manifest, "--history-db", ledger, "--no-plot") == 0
        assert _run(out_dir, "report", "--history", "sim-00", "--history-db", ledger) == 0
        rows = read_csv(os.path.join(out_dir, "history.csv"))
        assert [row["epoch"] for row in rows] == ["1", "2", "3"]
        assert float(rows[-1]["h_star"]) > 0
        assert "sim-00: 3 epochs recorded" in capsys.readouterr().out

    def test_history_unknown_sequence(self, tmp_path, out_dir, exact_manifest):
        ledger = str(tmp_path / "runs.db")
        assert _run(out_dir, "--epochs", "1", "camheight", exact_manifest, "--history-db", ledger, "--no-plot") == 0
        assert _run(out_dir, "report", "--history", "sim-99", "--history-db", ledger) == 2

    def test_history_without_ledger(self, tmp_path, out_dir):
        with patch("src.commands.report.Config.HISTORY_DATABASE_PATH", ""):
            assert _run(out_dir, "report", "--history", "sim-00") == 1
        assert _run(out_dir, "report", "--history", "sim-00", "--history-db", str(tmp_path / "none.db")) == 2

    def test_metrics(self, out_dir, exact_manifest):
        assert _run(out_dir, "report", "--metrics", exact_manifest, "--scale", "2.0") == 0
        rows = read_csv(os.path.join(out_dir, "metrics.csv"))
        assert [row["frame_id"] for row in rows] == ["000000", "mean"]
        assert float(rows[-1]["abs_rel"]) < 1e-6

    def test_dimensions(self, tmp_path, out_dir):
        predicted, reference = str(tmp_path / "pred.csv"), str(tmp_path / "ref.csv")
        write_dimension_table(predicted, {1: Dimensions(1.65, 1.8, 4.4)})
        write_dimension_table(reference, {1: Dimensions(1.5, 1.8, 4.4)})
        assert _run(out_dir, "report", "--dimensions", predicted, reference) == 0
        rows = {row["metric"]: row["value"] for row in read_csv(os.path.join(out_dir, "dimensions.csv"))}
        assert float(rows["height"]) == pytest.approx(0.1)

    def test_malformed_table(self, tmp_path, out_dir, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("id,height_m,width_m,length_m\n3,abc,1.8,4.4\n")
        assert _run(out_dir, "report", "--dimensions", str(bad), str(bad)) == 2
        assert "line 2" in capsys.readouterr().err
