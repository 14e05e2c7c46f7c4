import subprocess
import sys
from fractions import Fraction

import pytest

from tasktn.cli import main
from tasktn.fixtures import bundled
from tasktn.formats import read_circuit, read_network, write_network
from tasktn.network import full_sum


def kv(text):
    return dict(line.split("=", 1) for line in text.strip().splitlines())


@pytest.fixture
def files(tmp_path):
    out = {}
    for name in ("example_d2", "example_d2_sliced_e", "shared_chain"):
        p = tmp_path / f"{name}.net"
        write_network(bundled(name), p)
        out[name] = str(p)
    return out


def cli(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_contract_example_matches_full_sum(files, capsys):
    code, out, _ = cli(capsys, "contract", files["example_d2"])
    assert code == 0
    r = kv(out)
    amp = complex(r["amplitude"])
    assert amp == pytest.approx(full_sum(read_network(files["example_d2"]).network), rel=1e-6)
    assert r["n_sl"] == "1"


def test_contract_share_on_off(files, capsys):
    _, on, _ = cli(capsys, "contract", files["example_d2_sliced_e"], "--share", "on")
    _, off, _ = cli(capsys, "contract", files["example_d2_sliced_e"], "--share", "off")
    on, off = kv(on), kv(off)
    assert on["amplitude"] == off["amplitude"]
    assert on["n_sl"] == off["n_sl"] == "2"
    est = kv(cli(capsys, "estimate", files["example_d2_sliced_e"], "--rate", "1")[1])
    f, N = Fraction(est["f_sl_exact"]), 2
    assert Fraction(int(on["flop"]), int(off["flop"])) == f / N + (1 - f)
    assert int(on["tasks"]) < int(off["tasks"])


def test_contract_json_and_workers(files, capsys, monkeypatch):
    monkeypatch.setenv("TASKTN_WORKERS", "4")
    code, out, _ = cli(capsys, "contract", files["example_d2"], "--json")
    assert code == 0 and '"workers": 4' in out


def test_estimate(files, capsys):
    r1 = kv(cli(capsys, "estimate", files["example_d2_sliced_e"], "--rate", "1")[1])
    assert r1["n_sl"] == "2"
    assert Fraction(r1["seconds_exact"]) == int(r1["flop_amp"]) == int(r1["flop_amp_shared"])
    r2 = kv(cli(capsys, "estimate", files["example_d2_sliced_e"], "--rate", "2")[1])
    assert Fraction(r2["seconds_exact"]) * 2 == Fraction(r1["seconds_exact"])
    off = kv(cli(capsys, "estimate", files["example_d2_sliced_e"], "--rate", "1", "--share", "off")[1])
    assert int(off["flop_amp"]) == int(off["flop_amp_unshared"]) == 2 * int(off["flop_sl"])


def test_estimate_external_flop(capsys):
    r = kv(cli(capsys, "estimate", "--flop", "6.4e20", "--rate", "442e15")[1])
    assert Fraction(r["seconds_exact"]) == Fraction(64 * 10**19, 442 * 10**15)
    assert float(r["seconds"]) == 6.4e20 / 442e15


def test_generate_gbs_counts_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.circ", tmp_path / "b.circ"
    code, out, _ = cli(capsys, "generate", "--dim", "3", "--width", "4", "--cycles", "1", "--cutoff", "2", "--out", str(a))
    assert code == 0
    r = kv(out)
    assert (r["gates_S"], r["gates_BS"]) == ("64", "171")
    cli(capsys, "generate", "--dim", "3", "--width", "4", "--cycles", "1", "--cutoff", "2", "--out", str(b))
    assert a.read_bytes() == b.read_bytes()
    code, out, _ = cli(capsys, "generate", "--dim", "1", "--width", "2", "--cycles", "0", "--out", str(a))
    c = read_circuit(a)
    assert [g.name for g in c.gates] == ["S", "S"]


def test_generate_emit_network(tmp_path, capsys):
    circ, net = tmp_path / "c.circ", tmp_path / "c.net"
    code, out, _ = cli(
        capsys, "generate", "--random", "--wires", "3", "--qudit-dim", "2", "--depth", "2",
        "--seed", "3", "--out", str(circ), "--emit-network", str(net), "--basis", "1,0,1", "--precision", "double",
    )
    assert code == 0 and kv(out)["basis"] == "1,0,1"
    nf = read_network(net)
    assert nf.network.is_closed and nf.path is not None
    amp = complex(kv(cli(capsys, "contract", str(net))[1])["amplitude"])
    from tasktn.circuits import statevector_oracle

    assert amp == pytest.approx(statevector_oracle(read_circuit(circ))[1, 0, 1], rel=1e-10)


def test_slice_labels_and_max_rank(files, tmp_path, capsys):
    out = tmp_path / "s.net"
    code, text, _ = cli(capsys, "slice", files["example_d2"], "--labels", "e", "--out", str(out))
    assert code == 0
    r = kv(text)
    assert r["slices"] == "e" and r["n_sl"] == "2" and r["f_sl_exact"] == "2/11"
    assert read_network(out).slices == ("e",)
    r = kv(cli(capsys, "slice", files["example_d2"], "--max-rank", "3")[1])
    assert r["slices"] == "" and r["n_sl"] == "1"
    r = kv(cli(capsys, "slice", files["example_d2"], "--max-rank", "2")[1])
    assert int(r["max_rank"]) <= 2 and int(r["max_size"]) <= 4


def test_slice_errors(files, capsys):
    assert cli(capsys, "slice", files["example_d2"], "--labels", "zz")[0] == 3
    assert cli(capsys, "slice", files["example_d2"], "--max-rank", "0", "--k", "1")[0] == 3


def test_export_dot(files, capsys, tmp_path):
    code, dot, _ = cli(capsys, "export-dot", files["example_d2"])
    assert code == 0
    assert dot.count("kind=transpose") == 1
    assert dot.count("kind=") - dot.count("kind=leaf") == 1 + 6
    code, dot, _ = cli(capsys, "export-dot", files["example_d2_sliced_e"])
    assert dot.count("shared=true") == 2
    _, again, _ = cli(capsys, "export-dot", files["example_d2_sliced_e"])
    assert again == dot


def test_report_writes_csv_and_figures(files, tmp_path, capsys):
    outdir = tmp_path / "rep"
    code, out, err = cli(capsys, "report", files["example_d2_sliced_e"], "--outdir", str(outdir))
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("config,deletion,n_sl")
    assert len(lines) == 1 + 6
    assert (outdir / "report.csv").read_text().replace("\r\n", "\n") == out
    for png in ("peak_memory.png", "flop.png"):
        assert (outdir / png).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_exit_codes(files, tmp_path, capsys):
    assert cli(capsys, "contract")[0] == 2
    assert cli(capsys, "contract", files["example_d2"], "--delete", "maybe")[0] == 2
    assert cli(capsys, "estimate", "--rate", "1")[0] == 2
    bad = tmp_path / "bad.net"
    bad.write_text("tensor a x:2\ndata 1\n")
    code, _, err = cli(capsys, "contract", str(bad))
    assert code == 3 and "line 2" in err
    assert cli(capsys, "contract", str(tmp_path / "missing.net"))[0] == 3
    assert cli(capsys, "contract", files["example_d2"], "--memory-limit", "64")[0] == 4


def test_bad_env_workers(files, capsys, monkeypatch):
    monkeypatch.setenv("TASKTN_WORKERS", "many")
    assert cli(capsys, "contract", files["example_d2"])[0] == 2


def test_module_entry_point(files):
    proc = subprocess.run([sys.executable, "-m", "tasktn", "contract", files["example_d2"]], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("amplitude=")
    proc = subprocess.run([sys.executable, "-m", "tasktn", "nope"], capture_output=True, text=True)
    assert proc.returncode == 2
