"""
Unit tests for the randcons command line.
"""

import pandas as pd

from randcons.cli import main


def _generate(tmp_path, *extra):
    out = tmp_path / "instance.json"
    argv = ["generate", "milp", "--n", "3", "--constraints", "6", "--dz", "1", "--dr", "1",
            "--rho", "0", "--degree", "1", "--diameter", "2", "--delta", "0.001", "-o", str(out), *extra]
    assert main(argv) == 0
    return out


class TestCli:
    def test_bounds(self, capsys):
        assert main(["bounds", "--epsilon", "0.01", "--delta", "1e-10", "--space", "2", "3"]) == 0
        out = capsys.readouterr().out
        assert "h: 16" in out
        assert "sample_size(k=1): 2520" in out
        assert "alamo_bound: 5858" in out

    def test_generate_writes_instance(self, tmp_path, capsys):
        out = _generate(tmp_path)
        assert out.exists()
        assert "OK: wrote" in capsys.readouterr().out

    def test_run_writes_outputs(self, tmp_path, capsys):
        instance = _generate(tmp_path)
        trace, rep, plot = tmp_path / "trace.csv", tmp_path / "report.csv", tmp_path / "plot.svg"
        code = main(["run", str(instance), "--max-rounds", "200", "--posterior", "20",
                     "--trace", str(trace), "--report", str(rep), "--plot", str(plot)])
        assert code == 0
        out = capsys.readouterr().out
        assert "outcome: halted" in out
        assert "nodes agree: True" in out
        assert list(pd.read_csv(trace).columns) == ["t", "node", "event", "cost", "basis_size", "k_i"]
        assert rep.exists() and plot.exists()

    def test_posterior(self, tmp_path, capsys):
        instance = _generate(tmp_path)
        assert main(["posterior", str(instance), "--x", "0,0", "--samples", "50"]) == 0
        assert "empirical violation: 0 " in capsys.readouterr().out

    def test_batch(self, tmp_path, capsys):
        out = tmp_path / "batch.csv"
        code = main(["batch", "milp", "--n", "3", "--constraints", "6", "--dz", "1", "--dr", "1",
                     "--rho", "0.05", "--degree", "1", "--diameter", "2", "--delta", "0.001",
                     "--runs", "2", "--max-rounds", "200", "-o", str(out)])
        assert code == 0
        assert len(pd.read_csv(out)) == 3
        assert "halted: 2/2" in capsys.readouterr().out

    def test_missing_instance(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "nope.json")]) == 1
        assert "Error:" in capsys.readouterr().err

    def test_bad_config(self, tmp_path, capsys):
        instance = _generate(tmp_path)
        config = tmp_path / "config.json"
        config.write_text('{"sim": {"bogus": 1}}', encoding="utf-8")
        assert main(["--config", str(config), "run", str(instance)]) == 1
        assert "bogus" in capsys.readouterr().err
