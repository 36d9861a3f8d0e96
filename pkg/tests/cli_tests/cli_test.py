import json
import math

import pandas as pd
import pytest

from quasiperiod.cli import main

TWO_COSH = {"terms": [{"lambda": 1, "re": 1, "im": 0}, {"lambda": -1, "re": 1, "im": 0}]}
COSH_WINDOW = {"re_min": -1, "re_max": 1, "im_min": 0, "im_max": 60}

BAD_INPUTS = [
    ({"terms": [{"re": 1, "im": 0}]}, "terms[0].lambda"),
    ({"terms": [{"lambda": 1, "re": "x", "im": 0}]}, "terms[0].re"),
    ({"offsets": []}, "terms"),
]


def write(path, doc) -> str:
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def run(tmp_path, *argv) -> tuple[int, dict]:
    out = tmp_path / "report.json"
    code = main(["--out", str(out), *argv])
    return code, json.loads(out.read_text(encoding="utf-8"))


def cosh_divisor(omega: float) -> dict:
    k_max = int(60 * omega / math.pi)
    points = [{"re": 0.0, "im": math.pi * (k + 0.5) / omega} for k in range(k_max + 1)]
    return {"points": [p for p in points if p["im"] <= 60], "window": COSH_WINDOW}


@pytest.fixture
def two_cosh(tmp_path) -> str:
    return write(tmp_path / "two_cosh.json", TWO_COSH)


def test_zeros(tmp_path, two_cosh):
    code, report = run(tmp_path, "zeros", "--qp", two_cosh, "--window", "-1,1,0,10")
    assert code == 0
    assert report["command"] == "zeros"
    assert report["outputs"]["count"] == 3
    ims = [z["im"] for z in report["outputs"]["zeros"]["zeros"]]
    assert ims == pytest.approx([math.pi * k for k in (0.5, 1.5, 2.5)], abs=1e-10)
    assert report["inputs"]["tol_zero"] == 1e-12
    assert report["timing"] >= 0


def test_report_goes_to_stdout(two_cosh, capsys):
    code = main(["zeros", "--qp", two_cosh, "--window", "-1,1,0,10"])
    captured = capsys.readouterr()
    assert code == 0
    assert json.loads(captured.out)["outputs"]["count"] == 3
    assert "Zeros" in captured.err


def test_missing_file(tmp_path):
    missing = str(tmp_path / "nope.json")
    code, report = run(tmp_path, "zeros", "--qp", missing, "--window", "-1,1,0,10")
    assert code == 2
    assert report["outputs"]["error"]["code"] == "INPUT_FILE"
    assert missing in report["outputs"]["error"]["message"]


@pytest.mark.parametrize("doc,field", BAD_INPUTS)
def test_malformed_function(tmp_path, doc, field):
    path = write(tmp_path / "bad.json", doc)
    code, report = run(tmp_path, "zeros", "--qp", path, "--window", "-1,1,0,10")
    assert code == 2
    assert field in report["outputs"]["error"]["message"]


def test_malformed_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"terms": [\n', encoding="utf-8")
    code, report = run(tmp_path, "zeros", "--qp", str(path), "--window", "-1,1,0,10")
    assert code == 2
    assert report["outputs"]["error"]["code"] == "PARSE"


def test_bad_window(tmp_path, two_cosh):
    code, report = run(tmp_path, "zeros", "--qp", two_cosh, "--window", "1,2,3")
    assert code == 2
    assert "--window" in report["outputs"]["error"]["message"]


def test_analyze_periodic_zero_set(tmp_path, two_cosh):
    code, report = run(tmp_path, "analyze", "--qp", two_cosh, "--window", "-1,1,-50,50")
    outputs = report["outputs"]
    assert code == 0
    assert outputs["verdict"] == "PERIODIC"
    assert outputs["period"] == pytest.approx(math.pi, rel=1e-9)
    assert outputs["multipliers"] == [1]
    assert outputs["gap_trend"] == pytest.approx([math.pi, math.pi], rel=1e-9)
    assert outputs["certificates"][0]["two_sided"]


def test_analyze_needs_window_with_function(tmp_path, two_cosh):
    code, report = run(tmp_path, "analyze", "--qp", two_cosh)
    assert code == 2
    assert report["outputs"]["error"]["code"] == "INPUT_ERROR"


def test_analyze_incommensurable_pair(tmp_path):
    Z = write(tmp_path / "z.json", cosh_divisor(1.0))
    W = write(tmp_path / "w.json", cosh_divisor(math.sqrt(2)))
    code, report = run(tmp_path, "analyze", "--divisor", Z, "--divisor-w", W)
    assert code == 1
    assert report["outputs"]["verdict"] == "NO_DISCRETE_DIFFERENCES"
    small, full = report["outputs"]["gap_trend"]
    assert small >= 2 * full


def test_analyze_rotated_lattice_is_inconclusive(tmp_path):
    lattice = str(tmp_path / "lattice.json")
    assert main(["--out", str(tmp_path / "gen.json"), "gen", "example2", "--im-bound", "40", "--save", lattice]) == 0
    code, report = run(tmp_path, "analyze", "--divisor", lattice)
    assert code == 1
    assert report["outputs"]["verdict"] == "INCONCLUSIVE"
    assert report["outputs"]["diagnostic"]["code"] == "NON_REAL_PERIOD"


def test_analyze_nested_columns(tmp_path):
    columns = str(tmp_path / "columns.json")
    code, gen_report = run(tmp_path, "gen", "example1", "--k-max", "3", "--im-bound", "40", "--save", columns)
    assert code == 0
    assert "2^k" in gen_report["outputs"]["reading"]

    argv = ["analyze", "--divisor", columns, "--substrip", "0,3", "--substrip", "0,5", "--substrip", "0,9"]
    code, report = run(tmp_path, *argv)
    outputs = report["outputs"]
    assert code == 0
    assert outputs["verdict"] == "PERIODIC"
    assert outputs["periods"] == pytest.approx([2, 4, 8])
    assert outputs["common_unit"] == pytest.approx(2)
    assert outputs["multipliers"] == [1, 2, 4]
    assert outputs["period"] == pytest.approx(8)
    assert len(outputs["parts"]) == 3


def test_factor_two_cosh(tmp_path, two_cosh):
    code, report = run(tmp_path, "factor", "--qp", two_cosh, "--window", "-1,1,0,10")
    outputs = report["outputs"]
    assert code == 0
    assert outputs["fit"]["form"]["omega"] == pytest.approx(1)
    assert len(outputs["factors"]) == 1
    assert outputs["factors"][0]["period"] == pytest.approx(math.pi)
    assert outputs["quotient"]["certified"]
    assert outputs["quotient"]["zero_count"] == 0
    assert outputs["quotient"]["min_modulus"] == pytest.approx(math.exp(-1), rel=1e-6)


def test_verify_saved_analysis(tmp_path, two_cosh):
    saved = tmp_path / "analysis.json"
    assert main(["--out", str(saved), "analyze", "--qp", two_cosh, "--window", "-1,1,-50,50"]) == 0
    code, report = run(tmp_path, "verify", "--certificate", str(saved), "--qp", two_cosh, "--window", "-1,1,-50,50")
    assert code == 0
    assert report["outputs"]["verified"]
    assert report["outputs"]["results"][0]["period"] == pytest.approx(math.pi, rel=1e-9)


def test_verify_rejects_wrong_period(tmp_path, two_cosh):
    window = {"re_min": -1, "re_max": 1, "im_min": -20, "im_max": 20}
    certificate = {
        "period": math.pi / 2,
        "anchor": {"re": 0, "im": math.pi / 2},
        "tau_used": math.pi,
        "gamma": 0.5,
        "verified_windows": [window],
        "two_sided": True,
    }
    path = write(tmp_path / "cert.json", certificate)
    code, report = run(tmp_path, "verify", "--certificate", path, "--qp", two_cosh, "--window", "-1,1,-50,50")
    assert code == 1
    assert not report["outputs"]["verified"]
    assert report["warnings"]


def test_verify_needs_certificates(tmp_path, two_cosh):
    saved = tmp_path / "zeros.json"
    assert main(["--out", str(saved), "zeros", "--qp", two_cosh, "--window", "-1,1,0,10"]) == 0
    code, report = run(tmp_path, "verify", "--certificate", str(saved), "--qp", two_cosh, "--window", "-1,1,0,10")
    assert code == 2
    assert "outputs.certificates" in report["outputs"]["error"]["message"]


def test_plot_analysis(tmp_path, two_cosh):
    saved = tmp_path / "analysis.json"
    assert main(["--out", str(saved), "analyze", "--qp", two_cosh, "--window", "-1,1,-50,50"]) == 0
    out_dir = tmp_path / "figures"
    code, report = run(tmp_path, "plot", "--report", str(saved), "--out-dir", str(out_dir))
    assert code == 0
    assert report["outputs"]["files"] == sorted(
        f"{name}.{ext}" for name in ("differences", "taus", "zeros") for ext in ("csv", "svg")
    )
    taus = pd.read_csv(out_dir / "taus.csv")
    assert list(taus.columns) == ["tau", "displacement"]
    assert (taus["tau"] == 0).sum() == 1
    assert len(pd.read_csv(out_dir / "zeros.csv")) == 0


def test_plot_zero_table(tmp_path, two_cosh):
    saved = tmp_path / "zeros.json"
    assert main(["--out", str(saved), "zeros", "--qp", two_cosh, "--window", "-1,1,0,10"]) == 0
    out_dir = tmp_path / "figures"
    code, report = run(tmp_path, "plot", "--report", str(saved), "--out-dir", str(out_dir))
    assert code == 0
    assert report["outputs"]["files"] == ["zeros.csv", "zeros.svg"]
    zeros = pd.read_csv(out_dir / "zeros.csv")
    assert list(zeros.columns) == ["re", "im", "mult", "residual"]
    assert zeros["mult"].tolist() == [1, 1, 1]


def test_gen_kronecker(tmp_path):
    code, report = run(tmp_path, "gen", "kronecker", "--delta", "0.05", "--m-max", "20")
    solutions = report["outputs"]["object"]["solutions"]
    assert code == 0
    assert {"m": 0, "n": 0, "value": 0.0} in solutions
    assert any(s["m"] == 5 and s["n"] == 7 for s in solutions)
    assert 0.0 in report["outputs"]["taus"]


def test_gen_random_is_reproducible(tmp_path):
    _, first = run(tmp_path, "gen", "random", "--seed", "4")
    _, second = run(tmp_path, "gen", "random", "--seed", "4")
    assert first["outputs"]["object"] == second["outputs"]["object"]
    assert len(first["outputs"]["object"]["terms"]) == 5


def product_form(omega: float, b: complex) -> dict:
    return {"c_re": 1, "c_im": 0, "beta": 0, "omega": omega, "offsets": [{"re": b.real, "im": b.imag}]}


PRODUCT_CASES = [(omega, b) for omega in (1.0, 2.5, math.sqrt(2)) for b in (0j, 0.3 + 0.5j)]


@pytest.mark.parametrize("omega,b", PRODUCT_CASES)
def test_analyze_product_form_period(tmp_path, omega, b):
    path = write(tmp_path / "form.json", product_form(omega, b))
    code, report = run(tmp_path, "analyze", "--qp", path, "--window", "-1,1,-50,50")
    assert code == 0
    assert report["outputs"]["verdict"] == "PERIODIC"
    assert report["outputs"]["period"] == pytest.approx(math.pi / omega, abs=1e-9)


def test_analyze_reports_density_bound_and_sum_set(tmp_path, two_cosh):
    code, report = run(tmp_path, "analyze", "--qp", two_cosh, "--window", "-1,1,-50,50")
    outputs = report["outputs"]
    assert code == 0
    bound = outputs["density_bound"]
    assert bound["L"] == pytest.approx(math.pi, abs=1e-9)
    assert bound["classes"] == [0]
    assert bound["bound"] == pytest.approx(2 * math.pi, abs=1e-9)
    assert bound["within_bound"]
    assert outputs["almost_periods"]["density_gap"] <= bound["bound"]
    assert outputs["sum_set_gap"] == pytest.approx(math.pi, abs=1e-9)


def test_analyze_reflected_zero_set(tmp_path, two_cosh):
    code, report = run(tmp_path, "analyze", "--qp", two_cosh, "--window", "-1,1,-50,50", "--reflect")
    assert code == 0
    assert report["inputs"]["reflect"]
    assert report["outputs"]["verdict"] == "PERIODIC"
    assert report["outputs"]["period"] == pytest.approx(math.pi, abs=1e-9)


def test_analyze_stray_point_breaks_propagation(tmp_path):
    window = {"re_min": -3, "re_max": 3, "im_min": -50, "im_max": 50}
    points = [{"re": 0.0, "im": math.pi * (k + 0.5)} for k in range(-16, 16)]
    points.append({"re": 2.5, "im": 49.0})
    path = write(tmp_path / "stray.json", {"points": points, "window": window})
    code, report = run(tmp_path, "analyze", "--divisor", path)
    assert code == 1
    assert report["outputs"]["verdict"] == "INCONCLUSIVE"
    assert report["outputs"]["diagnostic"]["code"] == "PROPAGATION_BREAK"


@pytest.mark.parametrize("argv", [("zeros", "--window", "-1,1,0,40"), ("analyze", "--window", "-1,1,-50,50")])
def test_results_do_not_depend_on_threads(tmp_path, monkeypatch, two_cosh, argv):
    outputs = []
    for threads in ("1", "8"):
        monkeypatch.setenv("QP_THREADS", threads)
        code, report = run(tmp_path, argv[0], "--qp", two_cosh, *argv[1:])
        assert code == 0
        outputs.append(report["outputs"])
    assert outputs[0] == outputs[1]


def test_unexpected_failure_is_numerical(tmp_path, monkeypatch, two_cosh):
    def broken(*args, **kwargs):
        raise RuntimeError("boom")

    monkeypatch.setattr("quasiperiod._commands.zeros.find_zeros", broken)
    code, report = run(tmp_path, "zeros", "--qp", two_cosh, "--window", "-1,1,0,10")
    assert code == 3
    assert report["outputs"]["error"]["code"] == "INTERNAL"
    assert "RuntimeError: boom" in report["outputs"]["error"]["message"]
