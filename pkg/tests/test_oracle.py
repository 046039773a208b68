import pytest

from crisk.dgp import canned_dgps, random_dgp
from crisk.errors import ConfigError
from crisk.oracle import (exact_identifying_functional, true_estimand,
                          verify_identities)

TOL = 1e-10


def test_canned_dgps_all_pass(dgps):
    for name, dgp in dgps.items():
        report = verify_identities(dgp)
        assert report.all_pass, f"{name}: {[str(r) for r in report.failures[:3]]}"


def test_gform_families_agree(dgps):
    dgp = dgps["figure2_dgp"]
    for a in (0, 1):
        for k in range(dgp.horizon + 1):
            g2 = exact_identifying_functional(dgp, "gform2", a, k)
            taub = exact_identifying_functional(dgp, "gform2taub", a, k)
            i2f = exact_identifying_functional(dgp, "ipw2first", a, k)
            i2 = exact_identifying_functional(dgp, "ipw2", a, k)
            assert abs(g2 - taub) < TOL
            assert abs(taub - i2f) < TOL
            assert abs(taub - i2) < TOL
            g1 = exact_identifying_functional(dgp, "gform1", a, k)
            i1 = exact_identifying_functional(dgp, "ipw1", a, k)
            assert abs(g1 - i1) < TOL


def test_identification_under_full_exchangeability(dgps):
    dgp = dgps["figure1_dgp"]
    for a in (0, 1):
        assert abs(exact_identifying_functional(dgp, "gform1", a)
                   - true_estimand(dgp, "risk1", a)) < TOL
        assert abs(exact_identifying_functional(dgp, "gform2taub", a)
                   - true_estimand(dgp, "risk2", a)) < TOL
        assert abs(exact_identifying_functional(dgp, "gform_competing", a)
                   - true_estimand(dgp, "risk3", a)) < TOL


def test_nonidentification_under_confounded_competing_event(dgps):
    """When an unmeasured factor drives both event and competing hazards,
    the direct-effect functional is biased but the total-effect one is not."""
    dgp = dgps["figure2_dgp"]
    for a in (0, 1):
        identified = exact_identifying_functional(dgp, "gform1", a)
        truth = true_estimand(dgp, "risk1", a)
        assert abs(identified - truth) > 1e-3
        assert abs(exact_identifying_functional(dgp, "gform2taub", a)
                   - true_estimand(dgp, "risk2", a)) < TOL


def test_composite_accounting(dgps):
    for dgp in dgps.values():
        for a in (0, 1):
            for k in range(dgp.horizon + 1):
                composite = true_estimand(dgp, "composite", a, k)
                r2 = true_estimand(dgp, "risk2", a, k)
                r3 = true_estimand(dgp, "risk3", a, k)
                assert abs(composite - (r2 + r3)) < 1e-12
                assert composite <= 1.0 + 1e-12


def test_hazard_paradox_regenerated(dgps):
    dgp = dgps["hazard_paradox_dgp"]
    # the second-interval structural equation ignores treatment entirely
    assert "A" not in dgp.tables["Y2"].parents
    h1 = true_estimand(dgp, "hazard1", 1, 1)
    h0 = true_estimand(dgp, "hazard1", 0, 1)
    assert abs(h1 / h0 - 1.0) > 0.01
    report = verify_identities(dgp)
    names = [r.name for r in report.rows]
    assert any("paradox" in n for n in names)
    assert report.all_pass


def test_extreme_total_effect_signs(dgps):
    """Treatment that kills through the competing event: protective total
    effect on the event of interest, harmful on the competing event."""
    dgp = dgps["section6_extreme_dgp"]
    assert true_estimand(dgp, "risk2", 1) == pytest.approx(0.0, abs=TOL)
    assert true_estimand(dgp, "RD2") < -0.1
    assert true_estimand(dgp, "RD4") > 0.5
    rd3 = true_estimand(dgp, "RD3")
    assert abs(rd3 - (true_estimand(dgp, "RD2") + true_estimand(dgp, "RD4"))) < 1e-12


def test_sace_and_nde(dgps):
    dgp = dgps["figure1_dgp"]
    # the competing-event process ignores U, so cross-world selection is
    # exogenous and SACE matches the total effect restricted structure
    sace = true_estimand(dgp, "SACE")
    nde = true_estimand(dgp, "NDE")
    assert -1.0 <= sace <= 1.0 and -1.0 <= nde <= 1.0
    # in section6_extreme everybody dies of the competing event under a=1:
    # the principal stratum is empty
    from crisk.errors import PositivityError
    with pytest.raises(PositivityError):
        true_estimand(dgps["section6_extreme_dgp"], "SACE")


def test_hazard_contrasts_structure(dgps):
    out = true_estimand(dgps["figure2_dgp"], "hazard_contrasts", k=1)
    assert set(out) == {f"hazard{i}_{s}" for i in (1, 2, 3, 4)
                        for s in ("ratio", "difference")}
    for value in out.values():
        assert value is None or -5 < value < 5


def test_argument_validation(dgps):
    dgp = dgps["figure1_dgp"]
    with pytest.raises(ConfigError):
        exact_identifying_functional(dgp, "nonsense", 1)
    with pytest.raises(ConfigError):
        exact_identifying_functional(dgp, "gform1", 1, k=99)
    with pytest.raises(ConfigError):
        true_estimand(dgp, "risk1")  # arm required


def test_random_dgps_identities():
    for seed in range(25):
        report = verify_identities(random_dgp(seed))
        assert report.all_pass, (seed, [str(r) for r in report.failures[:3]])
