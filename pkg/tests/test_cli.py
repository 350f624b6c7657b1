import json
import math

import numpy as np
import pytest

from metaplectic.cli import main
from metaplectic.grid import load_signal
from metaplectic.grid import phase_invariant_distance as pid
from metaplectic.quantize import PhaseSymbol
from conftest import bump_symbol


def _run(tmp_path, *argv):
    code = main(list(argv) + ["--out-dir", str(tmp_path)])
    return code, json.loads((tmp_path / "manifest.json").read_text())


def _gen(tmp_path, what, name, *extra):
    code, _ = _run(tmp_path, "generate", what, "--out", name, *extra)
    assert code == 0
    return str(tmp_path / name)


def test_verify(tmp_path):
    mat = _gen(tmp_path, "matrix", "S.json", "--kind", "rank", "--dim", "2", "--rank", "1")
    code, man = _run(tmp_path, "verify", "--matrix", mat)
    assert code == 0 and man["ok"]
    names = [c["name"] for c in man["checks"]]
    assert any(n.startswith("residual_") for n in names)
    assert any(n.startswith("mapping_") for n in names)
    assert man["parameters"]["rank_A"] == 1


def test_verify_rejects_non_symplectic(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"matrix": [[2.0, 0.0], [0.0, 2.0]]}))
    code, man = _run(tmp_path, "verify", "--matrix", str(p))
    assert code != 0 and not man["ok"]


def test_apply_and_routes(tmp_path):
    mat = _gen(tmp_path, "matrix", "S.json", "--kind", "rank", "--dim", "1", "--rank", "1", "--seed", "2")
    sig = _gen(tmp_path, "signal", "f.csv", "--kind", "gaussian", "--grid", "128,11.313708498984761")
    outs = {}
    for route in ("generators", "direct", "rearranged"):
        code, man = _run(tmp_path, "apply", "--matrix", mat, "--in", sig, "--out", f"{route}.csv",
                         "--route", route, "--wigner")
        assert code == 0, man
        outs[route] = load_signal(tmp_path / f"{route}.csv")[0]
    assert pid(outs["direct"], outs["generators"]) < 1e-3
    assert pid(outs["rearranged"], outs["generators"]) < 1e-3


def test_apply_bad_route_is_error(tmp_path):
    mat = _gen(tmp_path, "matrix", "S.json", "--kind", "rank", "--dim", "1", "--rank", "0")
    sig = _gen(tmp_path, "signal", "f.csv", "--kind", "gaussian", "--grid", "64,8")
    code, man = _run(tmp_path, "apply", "--matrix", mat, "--in", sig, "--out", "g.csv",
                     "--route", "nonsingular")
    assert code == 2 and "SingularBlockA" in man["error"]


def test_fio_apply_with_gabor(tmp_path, line):
    mat = _gen(tmp_path, "matrix", "S.json", "--kind", "rank", "--dim", "1", "--rank", "1")
    sig = _gen(tmp_path, "signal", "f.bin", "--kind", "gaussian", "--grid", "128,11.313708498984761",
               "--encoding", "bin")
    PhaseSymbol(line, values=bump_symbol(line).values).save(tmp_path / "sigma.bin")
    op = tmp_path / "op.json"
    op.write_text(json.dumps({"matrix": "S.json", "symbol": "sigma.bin", "form": "khee", "s": 5}))
    code, man = _run(tmp_path, "fio", "apply", "--op", str(op), "--in", sig, "--out", "g.bin",
                     "--encoding", "bin", "--gabor")
    assert code == 0, man
    names = {c["name"] for c in man["checks"]}
    assert names == {"khee_vs_composition", "decay_s_hat"}


def test_schrodinger_run_and_caustic(tmp_path):
    sig = _gen(tmp_path, "signal", "u0.bin", "--kind", "gaussian", "--dim", "2", "--grid", "64,8,2",
               "--center", "0.5", "0.7", "--encoding", "bin")
    code, man = _run(tmp_path, "schrodinger", "run", "--u0", sig, "--t", str(math.pi / 2),
                     "--steps", "64", "--out", "u.bin", "--trace", "trace.csv", "--trace-every", "16",
                     "--encoding", "bin")
    assert code == 0, man
    rows = (tmp_path / "trace.csv").read_text().splitlines()
    assert rows[0] == "step,time,norm,stft_sup" and len(rows) == 6
    code, man = _run(tmp_path, "schrodinger", "caustic", "--u0", sig, "--out", "c.bin",
                     "--encoding", "bin")
    assert code == 0, man


def test_schrodinger_step_too_large(tmp_path):
    sig = _gen(tmp_path, "signal", "u0.bin", "--kind", "gaussian", "--dim", "2", "--grid", "64,8,2",
               "--encoding", "bin")
    V = _gen(tmp_path, "signal", "V.bin", "--kind", "constant", "--dim", "2", "--grid", "64,8,2",
             "--value", "100", "--encoding", "bin")
    code, man = _run(tmp_path, "schrodinger", "run", "--u0", sig, "--V", V, "--t", "1.0",
                     "--steps", "8", "--out", "u.bin")
    assert code == 2 and "StepTooLarge" in man["error"]


def test_rerun_bit_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        d.mkdir()
        mat = _gen(d, "matrix", "S.json", "--kind", "random", "--dim", "1", "--seed", "3")
        sig = _gen(d, "signal", "f.csv", "--kind", "gaussian", "--grid", "64,8")
        assert _run(d, "apply", "--matrix", mat, "--in", sig, "--out", "g.csv")[0] == 0
    for name in ("S.json", "f.csv", "g.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert np.array_equal(load_signal(a / "g.csv")[0].values, load_signal(b / "g.csv")[0].values)
