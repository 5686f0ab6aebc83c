import json

import pytest

from opspec import corpus
from opspec.cli import main
from opspec.config_loader import SEED_ENV
from opspec.families import parse_family


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out else None)


def _write_matrix(path, rows):
    path.write_text(json.dumps(rows))
    return str(path)


def test_corpus_listing(capsys):
    code, report = _run(capsys, "corpus")
    assert code == 0
    assert report["command"] == "corpus"
    assert set(report["results"]["families"]) == set(corpus.names())
    assert report["family_digest"] is None


def test_corpus_export_round_trips(tmp_path, capsys):
    code, report = _run(capsys, "corpus", "--export", str(tmp_path / "families"))
    assert code == 0
    assert len(report["results"]["exported"]) == len(corpus.names())
    for name in corpus.names():
        family = parse_family((tmp_path / "families" / f"{name}.json").read_bytes())
        assert family == corpus.builtin(name)


def test_spectrum_to_file(tmp_path, capsys):
    out = tmp_path / "spectrum.json"
    code, stdout = _run(capsys, "spectrum", "builtin:linear", "--interval", "0", "4", "--out", str(out))
    assert code == 0
    assert stdout is None
    report = json.loads(out.read_text())
    values = [entry["value"] for entry in report["results"]["spectrum"]["eigenvalues"]]
    assert values == pytest.approx([1.0, 2.0, 3.0])
    assert [slope["slope"] for slope in report["results"]["crossing_slopes"]] == pytest.approx([-1.0] * 3)
    assert report["family_digest"] == corpus.builtin("linear").digest()


def test_reports_are_reproducible(tmp_path, capsys):
    reports = []
    for name in ("first.json", "second.json"):
        path = tmp_path / name
        argv = ["bounds", "builtin:multiplicity-rotated", "--gamma", "0", "--n", "2"]
        assert main([*argv, "--samples", "8", "--seed", "5", "--out", str(path)]) == 0
        data = json.loads(path.read_text())
        data.pop("timings")
        reports.append(data)
    assert reports[0] == reports[1]
    assert reports[0]["config"]["sampling"]["seed"] == 5


def test_bounds_witness_value(capsys):
    code, report = _run(capsys, "bounds", "builtin:linear", "--gamma", "0.5", "--n", "2", "--samples", "8")
    assert code == 0
    assert report["results"]["passed"] is True
    assert report["results"]["equality"]["lambda_n"] == pytest.approx(2.0)


def test_bounds_with_too_few_eigenvalues(capsys):
    code, report = _run(capsys, "bounds", "builtin:gap-linear", "--gamma", "0", "--n", "2", "--samples", "4")
    assert code == 1
    assert "error" in report["results"]
    assert report["results"]["sampled"]["value"]["tag"] == "neg_inf"


def test_certify_exit_codes(capsys):
    code, report = _run(capsys, "certify", "builtin:gap-linear", "--mu1", "0", "--mu2", "1")
    assert code == 0
    assert report["results"]["certificate"]["verdict"] == "certified"

    code, report = _run(capsys, "certify", "builtin:remark-i", "--mu1", "-1", "--mu2", "0")
    assert code == 1
    assert report["results"]["certificate"]["evidence"]["failed_step"] == "vm"


def test_certify_rejects_spectral_mu1(capsys):
    code, _ = _run(capsys, "certify", "builtin:linear", "--mu1", "1", "--mu2", "2.5")
    assert code == 2


def test_perturb(tmp_path, capsys):
    A = _write_matrix(tmp_path / "A.json", [[-1.0, 0.0], [0.0, 2.0]])
    B = _write_matrix(tmp_path / "B.json", [[0.5, 0.0], [0.0, 0.0]])
    code, report = _run(capsys, "perturb", A, B, "--alpha", "-1", "--beta", "2")
    assert code == 0
    gap = report["results"]["gap"]
    assert gap["verdict"] == "certified"
    assert gap["alpha_hat"] == pytest.approx(-0.5)


def test_perturb_rejects_bad_matrix_file(tmp_path, capsys):
    A = _write_matrix(tmp_path / "A.json", [[-1.0, 0.0], [0.0, 2.0]])
    broken = tmp_path / "B.json"
    broken.write_text("[[0.5, \"x\"]]")
    assert main(["perturb", A, str(broken), "--alpha", "-1", "--beta", "2"]) == 2
    assert "invalid matrix file" in capsys.readouterr().err


def test_decompose(capsys):
    code, report = _run(capsys, "decompose", "builtin:linear", "--alpha", "1.5", "--beta", "2.5")
    assert code == 0
    assert report["results"]["decomposition"]["dims"] == [1, 1, 1]


def test_vm_refutation_exit_code(capsys):
    argv = ["vm", "builtin:remark-i-scalar", "--interval", "-0.5", "0.5", "--eps", "0.01", "--delta", "0.1"]
    code, report = _run(capsys, *argv)
    assert code == 1
    assert report["results"]["certificate"]["verdict"] == "refuted"


def test_curves_files(tmp_path, capsys):
    csv_path, svg_path = tmp_path / "curves.csv", tmp_path / "plots" / "curves.svg"
    argv = ["curves", "builtin:remark-iii-4", "--interval", "0", "2"]
    code, report = _run(capsys, *argv, "--csv", str(csv_path), "--svg", str(svg_path))
    assert code == 0
    assert csv_path.read_text().splitlines()[0] == "lambda,mu1,mu2,mu3,mu4"
    assert svg_path.read_bytes().startswith(b"<?xml")
    crossings = [points[0] for points in report["results"]["zero_crossings"]]
    assert crossings == pytest.approx([0.25, 1.0 / 3.0, 0.5, 1.0], abs=0.006)


def test_validate(capsys):
    code, report = _run(capsys, "validate", "builtin:schur", "--samples", "8", "--grid", "128")
    assert code == 0
    assert report["results"]["validation"]["passed"] is True

    code, _ = _run(capsys, "validate", "builtin:schur", "--strict")
    assert code == 2


def test_input_errors_exit_with_two(tmp_path, capsys):
    bad = tmp_path / "family.json"
    bad.write_text('{"kind": "shifted_linear", "A": [[1.0, 2.0], [0.0, 1.0]]}')
    assert main(["spectrum", str(bad), "--interval", "0", "4"]) == 2
    assert main(["spectrum", "builtin:nope", "--interval", "0", "4"]) == 2
    assert main(["spectrum", "builtin:linear", "--interval", "4", "0"]) == 2
    assert main(["spectrum", "builtin:linear"]) == 2
    assert main(["spectrum", "builtin:linear", "--interval", "1", "4"]) == 2
    err = capsys.readouterr().err
    assert "opspec: error:" in err


def test_config_file_and_seed_environment(tmp_path, capsys, monkeypatch):
    bad = tmp_path / "bad.yaml"
    bad.write_text("opspec:\n  grids:\n    rayleigh: 1\n")
    assert main(["corpus", "--config", str(bad)]) == 2

    good = tmp_path / "good.yaml"
    good.write_text("opspec:\n  sampling:\n    seed: 3\n")
    monkeypatch.setenv(SEED_ENV, "77")
    code, report = _run(capsys, "corpus", "--config", str(good), "--seed", "9")
    assert code == 0
    assert report["config"]["sampling"]["seed"] == 77

    monkeypatch.setenv(SEED_ENV, "not-a-number")
    assert main(["corpus"]) == 2
