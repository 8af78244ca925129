import csv
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from syndcorr import diagnostics as dg
from syndcorr.code_model import DetectorCoord, ErrorClass, ErrorSignature
from syndcorr.noise_sim import NoiseParams, SignatureChannel, detector_error_model, sample_signature_channels


@settings(max_examples=80, deadline=None)
@given(st.floats(1e-4, 0.2), st.floats(0.0, 1.0))
def test_drift_closed_form_reproduces_two_regime_moments(p, eps):
    p1, p2, p12 = dg.drift_closed_form(p, eps)
    assert p1 == p2
    # the fitted three-channel model must reproduce the mixture's first and second moments
    pa, pb = (1 - eps) * p, (1 + eps) * p
    s1 = 0.5 * ((1 - 2 * pa) + (1 - 2 * pb))
    s12 = 0.5 * ((1 - 2 * pa) ** 2 + (1 - 2 * pb) ** 2)
    assert (1 - 2 * p1) * (1 - 2 * p12) == pytest.approx(s1, abs=1e-12)
    assert (1 - 2 * p1) ** 2 == pytest.approx(s12, abs=1e-12)


def test_drift_limits():
    assert dg.drift_closed_form(0.05, 0.0)[2] == pytest.approx(0.0, abs=1e-15)
    assert dg.drift_closed_form(0.05)[2] == pytest.approx(0.003058, abs=5e-7)
    assert dg.drift_closed_form(1e-4)[2] / 1e-8 == pytest.approx(1.0, rel=1e-3)
    with pytest.raises(ValueError):
        dg.drift_closed_form(0.05, 1.5)


def test_drift_demo_without_shots():
    r = dg.drift_demo(0.05)
    assert r.simulated is None and r.analytic == dg.drift_closed_form(0.05)


def test_bias_demo_tables():
    pairs, full, spitz = dg.bias_demo()
    V = [DetectorCoord("V1", t) for t in (0, 2, 4)]
    assert full.p((V[0],)) == pytest.approx(0.03, abs=1e-12)
    assert full.p(tuple(V)) == pytest.approx(0.01, abs=1e-12)
    assert [round(spitz.p(k), 6) for k in pairs] == [0.020408, -0.010204, -0.010204, 0.0345, 0.01, 0.01]


@pytest.fixture(scope="module")
def dem_avg(catalog4):
    """Exact rates of the default circuit noise for the bulk catalog signatures."""
    from syndcorr.code_model import canonical_key
    ref = catalog4.reference
    dem = detector_error_model(ref, NoiseParams())
    out = {}
    for k, p in dem.probabilities.items():
        if ref.is_bulk(k) and catalog4.lookup(k):
            out[canonical_key(k)] = p
    return out


def test_class_totals_are_additive(dem_avg, catalog4):
    rep = dg.class_totals(dem_avg, catalog4)
    assert math.fsum(rep.totals.values()) == pytest.approx(math.fsum(dem_avg.values()), rel=1e-12)
    assert sum(rep.counts.values()) == len(dem_avg)
    assert rep.totals[ErrorClass.C] == 0.0 and rep.counts[ErrorClass.C] == 0
    assert rep.clipped_totals == rep.totals  # nothing negative in exact rates
    header, rows = dg.class_rows(rep)
    assert len(rows) == len(ErrorClass) and header[0] == "class"


def test_xy_pairs_and_exact_symmetry(dem_avg, catalog4):
    pairs = dg.xy_pairs(catalog4)
    assert len(pairs) == 3
    pts = dg.xy_symmetry(dem_avg, catalog4)
    assert len(pts) == 3
    for q in pts:
        assert q.p_x == pytest.approx(q.p_y, rel=1e-12)
        assert math.isnan(q.z())


def test_p_vs_nu_excludes_time_like(dem_avg, catalog4):
    sc = dg.p_vs_nu(dem_avg, catalog4)
    assert sc.spearman > 0.5
    assert all(nu >= 1 for _, nu, _ in sc.points)
    assert all(len({d.ancilla for d in k}) > 1 or len(k) == 1 for k, _, _ in sc.points)


def test_time_decay_recovers_base():
    dets = tuple(DetectorCoord("Z1", 2 * i) for i in range(24))
    chans = [SignatureChannel(ErrorSignature((dets[i], dets[i + dm])), 0.02 * 0.6 ** dm)
             for dm in range(1, 9) for i in range(len(dets) - dm)]
    ds = sample_signature_channels(chans, dets, 300000, 1)
    fit = dg.time_decay_fit(ds, max_dm=6, min_dm=1)
    assert fit.fitted
    assert fit.base == pytest.approx(0.6, abs=0.05)
    header, rows = dg.decay_rows(fit)
    assert [r[0] for r in rows] == list(range(1, 7))


def test_time_decay_reports_missing_signal():
    dets = tuple(DetectorCoord("Z1", 2 * i) for i in range(10))
    ds = sample_signature_channels([SignatureChannel(ErrorSignature((d,)), 0.05) for d in dets], dets, 2000, 0)
    fit = dg.time_decay_fit(ds, min_dm=3)
    assert fit.note or fit.fitted


def test_tprime_signatures(sched4):
    tp = dg.tprime_signatures(sched4)
    assert tp and all(a.ancilla == b.ancilla and b.tick - a.tick == 4 for a, b in tp)


def test_mean_syndrome_curves(data4):
    curves = dg.mean_syndrome_vs_cycle(data4)
    assert set(curves) == {d.ancilla for d in data4.detector_list}
    for pts in curves.values():
        assert all(0 <= m <= 1 for _, m in pts)


def test_csv_writer(tmp_path):
    p = tmp_path / "x.csv"
    key = (DetectorCoord("Z1", 2), DetectorCoord("X1", 3))
    dg.write_csv(p, ["a", "b", "c"], [(key, 0.1, float("nan")), ("s", 3, "")])
    rows = list(csv.reader(open(p)))
    assert rows == [["a", "b", "c"], ["Z1:2 X1:3", "0.1", "nan"], ["s", "3", ""]]


def test_figure_file_names():
    assert set(dg.FIGURE_FILES) >= {"covariance", "classes", "p_vs_nu", "xy", "decay", "tprime_cycles",
                                    "tprime_ancillas", "mean_syndrome", "drift"}
    assert len(set(dg.FIGURE_FILES.values())) == len(dg.FIGURE_FILES)

