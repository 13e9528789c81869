import os
import subprocess
import sys

import pytest

from cgmm.cli import main
from cgmm.config import RunConfig
from cgmm.errors import ConfigError

FAST_CONFIG = "states = 6\nfingerprint_layers = all\npool_size = 3\nmax_layers = 3\nem_max_iters = 20\n"


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "fast.cfg").write_text(FAST_CONFIG)
    assert main(["synth", "two_hop", "--n", "15", "--seed", "1", "--out", str(d / "th.txt")]) == 0
    assert main(["train", str(d / "th.txt"), "--config", str(d / "fast.cfg"),
                 "--out", str(d / "model.txt")]) == 0
    return d


def test_synth_and_validate(workdir, capsys):
    assert main(["validate", str(workdir / "th.txt")]) == 0
    assert "30 graphs" in capsys.readouterr().out
    for kind in ("random", "cycles"):
        out = workdir / f"{kind}.txt"
        assert main(["synth", kind, "--n", "5", "--out", str(out)]) == 0
        assert main(["validate", str(out)]) == 0


def test_validate_reports_violations(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("dataset 2 1\ngraph g 0 2 1\nv 1\nv 5\nd 0 1 1\n")
    assert main(["validate", str(bad)]) == 2


def test_model_file_header(workdir):
    assert (workdir / "model.txt").read_text().startswith("cgmm-model v1\n")


def test_fingerprint_outputs(workdir):
    fp, km = workdir / "fp.csv", workdir / "k.txt"
    assert main(["fingerprint", str(workdir / "model.txt"), str(workdir / "th.txt"),
                 "--out", str(fp), "--kernel-out", str(km)]) == 0
    rows = fp.read_text().splitlines()
    assert len(rows) == 31 and rows[0].startswith("graph_id,target,c_1")
    assert km.read_text().splitlines()[0] == "kernel jaccard - 30"
    last = workdir / "fp_last.csv"
    main(["fingerprint", str(workdir / "model.txt"), str(workdir / "th.txt"),
          "--out", str(last), "--layers", "last"])
    assert len(last.read_text().splitlines()[0].split(",")) == 2 + 6


def test_inspect_rows(workdir):
    out = workdir / "inspect.csv"
    assert main(["inspect", str(workdir / "model.txt"), str(workdir / "th.txt"), "--out", str(out)]) == 0
    depth = sum(1 for ln in (workdir / "model.txt").read_text().splitlines() if ln.startswith("layer "))
    lines = out.read_text().splitlines()
    assert lines[0].startswith("class,layer,s_1")
    assert len(lines) == 1 + 2 * depth


def test_eval_prints_mean_and_std(workdir, capsys):
    cfg = workdir / "tiny.cfg"
    cfg.write_text("states = 4\nfingerprint_layers = all\npool_size = 2\nmax_layers = 2\nem_max_iters = 10\n")
    assert main(["eval", str(workdir / "th.txt"), "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("tenfold accuracy: ") and "(" in out and "depths:" in out


def test_missing_file_is_a_data_error(tmp_path, capsys):
    missing = tmp_path / "nope.txt"
    assert main(["validate", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_usage_errors_exit_1():
    with pytest.raises(SystemExit) as exc:
        main(["train"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["synth", "nonsense", "--out", "x"])
    assert exc.value.code == 1


def test_unknown_config_key(tmp_path, workdir, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("states = 4\nbogus = 1\n")
    assert main(["eval", str(workdir / "th.txt"), "--config", str(cfg)]) == 1
    assert "bogus" in capsys.readouterr().err


def test_config_parsing():
    cfg = RunConfig.parse("# comment\nstates = 5, 7\nfingerprint_layers = last\nseed = 3\n")
    assert cfg.states == (5, 7) and cfg.seed == 3
    assert [(c.C, c.layers) for c in cfg.grid()] == [(5, "last"), (7, "last")]
    assert RunConfig.parse(cfg.format()) == cfg
    with pytest.raises(ConfigError):
        RunConfig.parse("states = x\n")
    with pytest.raises(ConfigError):
        RunConfig.parse("no equals sign\n")


def _run_cli(args, **env):
    full = dict(os.environ, **env)
    return subprocess.run([sys.executable, "-m", "cgmm", *args], env=full,
                          capture_output=True, text=True, check=False)


@pytest.mark.slow
def test_train_output_independent_of_threads(workdir, tmp_path):
    cfg = workdir / "fast.cfg"
    outs = []
    for threads in ("1", "4"):
        out = tmp_path / f"m{threads}.txt"
        res = _run_cli(["train", str(workdir / "th.txt"), "--config", str(cfg), "--out", str(out)],
                       NUMBA_NUM_THREADS=threads)
        assert res.returncode == 0, res.stderr
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


@pytest.mark.slow
def test_numpy_fallback_trains(workdir, tmp_path):
    out = tmp_path / "np.txt"
    res = _run_cli(["train", str(workdir / "th.txt"), "--config", str(workdir / "fast.cfg"),
                    "--out", str(out)], CGMM_DISABLE_NUMBA="1")
    assert res.returncode == 0, res.stderr
    check = subprocess.run([sys.executable, "-c", "from cgmm import kernels; print(kernels.BACKEND)"],
                           env=dict(os.environ, CGMM_DISABLE_NUMBA="1"), capture_output=True, text=True)
    assert check.stdout.strip() == "numpy"
    assert out.read_text().startswith("cgmm-model v1")


def test_tu_converter(tmp_path):
    import importlib.util
    from pathlib import Path

    from cgmm.graph import read_dataset

    script = Path(__file__).resolve().parents[1] / "scripts" / "tu_to_cgmm.py"
    spec = importlib.util.spec_from_file_location("tu_to_cgmm", script)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    d = tmp_path / "TOY"
    d.mkdir()
    (d / "TOY_A.txt").write_text("1, 2\n2, 1\n3, 4\n4, 3\n")
    (d / "TOY_graph_indicator.txt").write_text("1\n1\n2\n2\n")
    (d / "TOY_graph_labels.txt").write_text("-1\n1\n")
    (d / "TOY_node_labels.txt").write_text("0\n6\n6\n6\n")
    mod.main([str(d), str(tmp_path / "toy.txt")])
    ds = read_dataset(tmp_path / "toy.txt")
    assert (ds.M, ds.A, len(ds)) == (2, 1, 2)
    assert ds[0].labels.tolist() == [1, 2] and ds[1].target == 1
    assert ds[1].n_arcs == 2
