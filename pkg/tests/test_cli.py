import json

import numpy as np
import pytest

from filtnoise import io
from filtnoise.cli import main

DNS = """[global]
seed = 5
[dns]
N = {N}
nu = 1e-3
alpha = 0.5
dt = 5e-3
k_f = 8
epsilon = 1
steps = 60
sample_every = 1
modes = 3,4; 8,0
"""

SYN = """[global]
seed = 3
[synth]
E = 0.5
k_max = 8
tau = 0.1
dt = 0.01
horizon = 1
[tracer]
field = {field}
M = 800
realizations = 8
dt = 0.002
T = 5
"""


def _cfg(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _run(*argv):
    return main([str(a) for a in argv])


def test_dns_run_outputs_and_determinism(tmp_path):
    cfg = _cfg(tmp_path, DNS.format(N=32))
    for d in ("a", "b"):
        assert _run("dns", "run", "--config", cfg, "--out", tmp_path / d) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    for rel in ("final.fnvs", "spectrum.csv", "energy.csv", "modes/mode_3_4.csv", "modes/mode_8_0.csv"):
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel
    assert io.verify_manifest(a) == []
    header, data = io.read_csv(a / "modes/mode_3_4.csv")
    assert header[0] == "t" and data.shape == (61, 2)


def test_seed_flag_changes_output(tmp_path):
    cfg = _cfg(tmp_path, DNS.format(N=32))
    _run("dns", "run", "--config", cfg, "--out", tmp_path / "a")
    _run("dns", "run", "--config", cfg, "--out", tmp_path / "b", "--seed", 6)
    assert (tmp_path / "a/final.fnvs").read_bytes() != (tmp_path / "b/final.fnvs").read_bytes()


def test_grid_not_multiple_of_four_is_config_error(tmp_path, capsys):
    cfg = _cfg(tmp_path, DNS.format(N=102))
    assert _run("dns", "run", "--config", cfg, "--out", tmp_path / "o") == 2
    assert "N" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_missing_config_file(tmp_path):
    assert _run("dns", "run", "--config", tmp_path / "none.ini", "--out", tmp_path / "o") == 4


def test_missing_seed_is_config_error(tmp_path):
    cfg = _cfg(tmp_path, DNS.format(N=32).replace("seed = 5", ""))
    assert _run("dns", "run", "--config", cfg, "--out", tmp_path / "o") == 2


def test_diag_empty_glob_warns(tmp_path, caplog):
    cfg = _cfg(tmp_path, f"[global]\nseed=1\n[diag]\ninputs = {tmp_path}/none/*.csv\n")
    assert _run("diag", "run", "--config", cfg, "--out", tmp_path / "o") == 0
    assert "nothing to do" in caplog.text


def test_diag_missing_explicit_input(tmp_path):
    cfg = _cfg(tmp_path, f"[global]\nseed=1\n[diag]\ninputs = {tmp_path}/nope.csv\n")
    assert _run("diag", "run", "--config", cfg, "--out", tmp_path / "o") == 4


def test_diag_malformed_input(tmp_path, capsys):
    bad = tmp_path / "m.csv"
    bad.write_text("t,value\n0,1\n0.1,x\n")
    cfg = _cfg(tmp_path, f"[global]\nseed=1\n[diag]\ninputs = {bad}\n")
    assert _run("diag", "run", "--config", cfg, "--out", tmp_path / "o") == 2
    assert ":3:" in capsys.readouterr().err


def test_diag_on_gaussian_paths(tmp_path):
    # paths of the Gaussian-kernel field should prefer the smooth end of the family
    cfg = _cfg(tmp_path, SYN.format(field="synthetic").replace("horizon = 1", "horizon = 400"))
    assert _run("synth", "build", "--config", cfg, "--out", tmp_path / "s") == 0
    header, data = io.read_csv(tmp_path / "s/paths.csv")
    for j in (1, 2):
        io.write_csv(tmp_path / f"in/p{j}.csv", ["t", "value"], data[:, [0, j]])
    dcfg = _cfg(tmp_path, f"[global]\nseed=1\n[diag]\ninputs = {tmp_path}/in/*.csv\n", "d.ini")
    assert _run("diag", "run", "--config", dcfg, "--out", tmp_path / "d") == 0
    rec = json.loads((tmp_path / "d/diag/p1.json").read_text())
    assert rec["tau_complete"]
    assert rec["beta_star"] == "inf" or rec["beta_star"] > 5
    assert rec["tau"] == pytest.approx(0.1, rel=0.25)
    assert (tmp_path / "d/correlations.json").exists()


def test_synth_build_outputs(tmp_path):
    cfg = _cfg(tmp_path, SYN.format(field="synthetic"))
    assert _run("synth", "build", "--config", cfg, "--out", tmp_path / "s") == 0
    field = json.loads((tmp_path / "s/field.json").read_text())
    assert field["k_max"] == 8 and field["tau"] == 0.1
    q = json.loads((tmp_path / "s/q_matrix.json").read_text())
    assert q["deviation"] < 0.2


def test_tracer_constant_is_ballistic(tmp_path):
    text = "[global]\nseed=1\n[tracer]\nfield = constant\nu0 = 1,0\nM = 50\ndt = 0.01\nT = 25\ntau = 0.5\n"
    assert _run("tracer", "disperse", "--config", _cfg(tmp_path, text), "--out", tmp_path / "o") == 0
    rep = json.loads((tmp_path / "o/regime.json").read_text())
    assert rep["ballistic_only"] and rep["long_pass"] is True
    assert rep["slope_long"] == pytest.approx(2.0, abs=1e-6)


def test_tracer_white_noise_is_diffusive(tmp_path):
    cfg = _cfg(tmp_path, SYN.format(field="white-noise"))
    assert _run("tracer", "disperse", "--config", cfg, "--out", tmp_path / "o") == 0
    rep = json.loads((tmp_path / "o/regime.json").read_text())
    assert 0.9 <= rep["slope_long"] <= 1.1
    assert rep["short_pass"] is None


def test_tracer_synthetic_without_tau(tmp_path, capsys):
    cfg = _cfg(tmp_path, SYN.format(field="synthetic").replace("tau = 0.1\n", ""))
    assert _run("tracer", "disperse", "--config", cfg, "--out", tmp_path / "o") == 2
    assert "tau" in capsys.readouterr().err


def test_tracer_span_too_short(tmp_path, capsys):
    cfg = _cfg(tmp_path, SYN.format(field="synthetic").replace("T = 5", "T = 1"))
    assert _run("tracer", "disperse", "--config", cfg, "--out", tmp_path / "o") == 3
    assert "50 tau" in capsys.readouterr().err


def test_predict(tmp_path):
    cfg = _cfg(tmp_path, "[global]\nseed=1\n[predict]\ntau = 0.1\nE = 0.5\n")
    assert _run("tracer", "predict", "--config", cfg, "--out", tmp_path / "o") == 0
    rep = json.loads((tmp_path / "o/regime.json").read_text())
    assert rep["slope_short"] == pytest.approx(2.0, abs=0.1)
    assert rep["slope_long"] == pytest.approx(1.0, abs=0.1)
    _, data = io.read_csv(tmp_path / "o/prediction.csv")
    assert np.all(np.diff(data[:, 1]) > 0)


def test_predict_requires_tau(tmp_path):
    cfg = _cfg(tmp_path, "[global]\nseed=1\n[predict]\nE = 0.5\n")
    assert _run("tracer", "predict", "--config", cfg, "--out", tmp_path / "o") == 2


def test_modes_extract_and_collapse(tmp_path):
    cfg = _cfg(tmp_path, DNS.format(N=32))
    _run("dns", "run", "--config", cfg, "--out", tmp_path / "a")
    mcfg = _cfg(tmp_path, f"[global]\nseed=5\n[modes]\nsnapshot = {tmp_path}/a/final.fnvs\nsteps = 40\nmodes = 1,2\n"
                + DNS.format(N=32).split("[global]\nseed = 5\n")[1], "m.ini")
    assert _run("modes", "extract", "--config", mcfg, "--out", tmp_path / "m") == 0
    _, data = io.read_csv(tmp_path / "m/modes/mode_1_2.csv")
    assert data.shape[0] == 41
    rcfg = _cfg(tmp_path, f"[global]\nseed=1\n[report]\ndiag_dir = {tmp_path}/nodir\n", "r.ini")
    assert _run("report", "collapse", "--config", rcfg, "--out", tmp_path / "r") == 4
