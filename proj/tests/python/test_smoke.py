import os
from pathlib import Path

import pytest

import cvqc

SRC = Path(os.environ.get("CVQC_SOURCE_DIR", Path(__file__).resolve().parents[2]))


def test_presets_and_validation():
    assert set(cvqc.preset_names()) == {"toy", "proto", "sim5"}
    toy = cvqc.preset("toy")
    assert toy["q"] == 83 and toy["w"] == 7
    assert cvqc.violations("toy") == []
    assert "noise_floor" in cvqc.violations("sim5")
    bad = dict(toy, B_V=toy["B_P"])
    assert "noise_order" in cvqc.violations(bad)
    assert cvqc.params_hash("toy") == cvqc.params_hash(toy)
    with pytest.raises(cvqc.InputError):
        cvqc.preset("nope")


def test_j_map_round_trip():
    assert cvqc.j_map([3], 5) == [1, 1, 0]
    assert cvqc.j_inv(cvqc.j_map([4, 1], 5), 2, 5) == [4, 1]
    with pytest.raises(cvqc.InputError):
        cvqc.j_inv([1, 0, 1], 1, 5)


def test_honest_sessions_accept():
    runs = cvqc.measure("zero", "0", round="test", trials=20, seed=1)
    assert all(r["accept"] for r in runs)
    had = cvqc.measure("plus", "1", round="hadamard", trials=20, zero_noise=True, seed=2)
    assert all(r["accept"] and r["m"] == [0] for r in had)


def test_exact_distribution_matches_ideal():
    d = cvqc.exact_distribution("bell", "01")
    assert d["accept_probability"] == pytest.approx(1.0)
    for k, v in d["ideal"].items():
        assert d["conditioned"].get(k, 0.0) == pytest.approx(v, abs=1e-9)


def test_hamiltonian_and_qpip():
    zz = SRC / "hamiltonians" / "zz.json"
    s = cvqc.hamiltonian_summary(zz)
    assert s["ground_energy"] == pytest.approx(-1.0)
    assert s["p_acc_ground"] == pytest.approx(1.0)
    q = cvqc.qpip(zz, kprime=3, trials=20, seed=3)
    assert q["accepted"] == 20
    with pytest.raises(cvqc.InputError):
        cvqc.hamiltonian_summary(SRC / "missing.json")


def test_lemma_reports():
    reports = cvqc.verify_lemmas(seed=4, negative_controls=True)
    assert {r["experiment"] for r in reports} >= {"z_twirl", "distance_lemmas"}
    assert all(r["passed"] for r in reports)
