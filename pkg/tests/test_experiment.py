import numpy as np
import pytest

from unmix import UnmixError
from unmix.cli import EXIT_OK, main
from unmix.experiment import ExperimentRow, rows_to_tsv, run_cell, run_experiment
from unmix.fileio import parse_experiment_config


CFG = """\
model = lmm
R = 3
L = 30
T = 16
snr_db = 25
corrupt_list = 0,6
algorithms = ls,fcls
seeds = 1,2,3
metric = rmse,sre
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text(CFG)
    return parse_experiment_config(path)


class TestGrid:
    def test_row_count_and_order(self, config):
        rows = run_experiment(config, max_workers=1)
        # algorithms x corrupt x seeds x metrics
        assert len(rows) == 2 * 2 * 3 * 2
        assert rows == sorted(rows, key=ExperimentRow.sort_key)
        per_alg_metric = 2 * 3
        ls_rmse = [r for r in rows if r.algorithm == "ls" and r.metric == "RMSE"]
        assert len(ls_rmse) == per_alg_metric

    def test_parallel_rows_identical(self, config):
        serial = rows_to_tsv(run_experiment(config, max_workers=1))
        parallel = rows_to_tsv(run_experiment(config, max_workers=4))
        assert serial == parallel

    def test_fcls_beats_ls_is_plausible(self, config):
        rows = run_experiment(config, max_workers=1)
        assert all(r.status == "ok" for r in rows)
        values = {
            (r.algorithm, r.n_corrupt, r.seed): r.value for r in rows if r.metric == "RMSE"
        }
        # the constrained solve should beat plain LS on noisy data
        wins = sum(
            values[("fcls", c, s)] <= values[("ls", c, s)] for c in (0, 6) for s in (1, 2, 3)
        )
        assert wins >= 4

    def test_failed_cell_gets_status_row(self, config, monkeypatch):
        import unmix.experiment as exp

        def boom(algorithm, handle, config):
            raise UnmixError("synthetic failure")

        monkeypatch.setattr(exp, "_solve_plain", boom)
        rows = run_experiment(config, max_workers=1)
        assert len(rows) == 24
        assert all(r.status == "error:UnmixError" and r.value is None for r in rows)
        text = rows_to_tsv(rows)
        assert "error:UnmixError" in text


class TestCliExperiment:
    def test_byte_identical_reruns(self, tmp_path, monkeypatch):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(CFG)
        out1, out2, out3 = (tmp_path / f"t{i}.tsv" for i in range(3))
        monkeypatch.setenv("UNMIX_THREADS", "1")
        assert main(["experiment", str(cfg), "--out", str(out1)]) == EXIT_OK
        assert main(["experiment", str(cfg), "--out", str(out2)]) == EXIT_OK
        monkeypatch.setenv("UNMIX_THREADS", "3")
        assert main(["experiment", str(cfg), "--out", str(out3)]) == EXIT_OK
        assert out1.read_bytes() == out2.read_bytes() == out3.read_bytes()

    def test_header_and_value_format(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(CFG.replace("seeds = 1,2,3", "seeds = 1"))
        assert main(["experiment", str(cfg)]) == EXIT_OK
        out = capsys.readouterr().out
        lines = out.splitlines()
        assert lines[0] == "algorithm\tmodel\tsnr\tn_corrupt\tK\tseed\tmetric\tvalue\tstatus"
        assert len(lines) == 1 + 2 * 2 * 1 * 2
        row = lines[1].split("\t")
        assert row[0] == "fcls" and row[-1] == "ok"
        float(row[7])
