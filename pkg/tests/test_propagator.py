import cmath
import math

import numpy as np
import pytest

from app.core.errors import InvalidParameterError, OverlapError, PathBudgetError, TopologyError
from app.models.schemas_complex import CWComplex, EdgePath
from app.models.schemas_propagator import StepRule, WaveFunction
from app.models.schemas_topology import Character
from app.services import complex_model, prequant_bundle, propagator_lab
from app.services.homology_engine import first_homology
from app.services.tools_io import InputLoader

loader = InputLoader()


def ring(n):
    return CWComplex(n_vertices=n, edges=[(i, (i + 1) % n) for i in range(n)])


def homology(c):
    return first_homology(complex_model.fundamental_presentation(c).presentation)


def test_transfer_matrix_layout():
    """T[x', x]: forward amplitude below, backward above, stay on the diagonal"""
    c = CWComplex(n_vertices=2, edges=[(0, 1)])
    rule = StepRule(forward=(2j,), backward=(3j,), stay=(0.5, 0.25))
    T = propagator_lab.transfer_matrix(c, rule)
    assert T[1, 0] == 2j
    assert T[0, 1] == 3j
    assert np.allclose(np.diag(T), [0.5, 0.25])


def test_count_paths():
    """Each hexagon vertex has three moves per step"""
    assert propagator_lab.count_paths(ring(6), 2) == 6 * 9
    assert propagator_lab.count_paths(ring(6), 0) == 6


@pytest.mark.parametrize("fixture, steps", [("annulus", 6), ("wedge", 4), ("two_particle", 5)])
def test_sectors_sum_to_plain_propagator(fixture, steps):
    c = loader.fixture(fixture).complex
    rule = propagator_lab.default_step_rule(c)
    sp = propagator_lab.sector_propagators(c, rule, steps)
    assert np.allclose(sp.total(), propagator_lab.plain_propagator(c, rule, steps), atol=1e-12)


@pytest.mark.parametrize("fixture, steps", [
    ("annulus", 8),
    ("wedge", 6),
    ("two_particle", 6),
    ("disc", 6),
    ("rp2", 8),
    ("cube_integral", 5),
])
def test_cover_engine_matches_enumeration(fixture, steps):
    c = loader.fixture(fixture).complex
    rule = propagator_lab.default_step_rule(c, hopping=0.3)
    cover = propagator_lab.sector_propagators(c, rule, steps, engine="cover")
    enumerated = propagator_lab.sector_propagators(c, rule, steps, engine="enumerate")
    assert propagator_lab.sector_deviation(cover, enumerated) < 1e-12
    assert np.allclose(cover.total(), propagator_lab.plain_propagator(c, rule, steps), atol=1e-12)


def test_winding_sector_on_hexagon():
    """Only the full circuit reaches sector +1 at [0, 0] in six steps"""
    c = ring(6)
    rule = propagator_lab.default_step_rule(c, hopping=0.1)
    sp = propagator_lab.sector_propagators(c, rule, 6)
    assert sp.sector((1,))[0, 0] == pytest.approx((0.1j) ** 6)
    assert sp.sector((-1,))[0, 0] == pytest.approx((0.1j) ** 6)
    assert np.allclose(sp.sector((2,)), 0)
    short = propagator_lab.sector_propagators(c, rule, 5)
    assert np.allclose(short.sector((1,))[0, 0], 0)


def test_weighted_propagator_is_gauged_transfer_power():
    """Character weighting equals the power of T with the flux phase on the generator edge"""
    c = ring(6)
    rule = propagator_lab.default_step_rule(c, hopping=0.2)
    alpha = 0.8
    sp = propagator_lab.sector_propagators(c, rule, 7)
    weighted = propagator_lab.weighted_propagator(sp, Character(free_angles=(alpha,)), homology(c))

    phase = cmath.exp(1j * alpha)
    forward = list(rule.forward)
    backward = list(rule.backward)
    forward[3] *= phase
    backward[3] /= phase
    gauged = StepRule(forward=tuple(forward), backward=tuple(backward), stay=rule.stay)
    assert np.allclose(weighted, propagator_lab.plain_propagator(c, gauged, 7), atol=1e-12)

    trivial = propagator_lab.weighted_propagator(sp, Character(free_angles=(0.0,)), homology(c))
    assert np.allclose(trivial, propagator_lab.plain_propagator(c, rule, 7), atol=1e-12)


def test_reference_paths_shift_sectors():
    """A reference path that winds once moves entries between sectors but keeps the total"""
    c = ring(6)
    rule = propagator_lab.default_step_rule(c)
    default = propagator_lab.sector_propagators(c, rule, 3)
    references = [
        complex_model.tree_path(c, complex_model.spanning_tree(c), v, 0) for v in range(6)
    ]
    references[3] = complex_model.make_path(c, 3, [(3, 1), (4, 1), (5, 1)])
    shifted = propagator_lab.sector_propagators(c, rule, 3, reference_paths=references)
    assert np.allclose(shifted.total(), default.total())
    assert shifted.sector((1,))[3, 0] == pytest.approx(default.sector((0,))[3, 0])
    assert "supplied" in shifted.basepath_convention


def test_enumeration_budget(monkeypatch):
    monkeypatch.setattr(propagator_lab.settings, "MAX_ENUMERATED_PATHS", 10)
    c = ring(6)
    with pytest.raises(PathBudgetError) as excinfo:
        propagator_lab.sector_propagators(c, propagator_lab.default_step_rule(c), 3, engine="enumerate")
    assert excinfo.value.count == 6 * 27


def test_invalid_run_parameters():
    c = ring(4)
    rule = propagator_lab.default_step_rule(c)
    with pytest.raises(InvalidParameterError):
        propagator_lab.sector_propagators(c, rule, -1)
    with pytest.raises(InvalidParameterError):
        propagator_lab.sector_propagators(c, rule, 2, engine="magic")


def test_ab_scan_is_periodic():
    """Intensity repeats after a flux of 2 pi hbar and actually depends on the flux"""
    c = loader.fixture("annulus").complex
    grid = propagator_lab.linear_flux_grid(0.0, 4 * math.pi, 9)
    scan = propagator_lab.ab_interference_scan(c, n_steps=6, flux_grid=grid, hbar=1.0)
    assert list(scan.columns) == ["flux", "intensity", "re_amplitude", "im_amplitude"]
    assert scan["intensity"].iloc[0] == pytest.approx(scan["intensity"].iloc[4], abs=1e-15)
    assert scan["intensity"].iloc[0] == pytest.approx(scan["intensity"].iloc[8], abs=1e-15)
    assert scan["intensity"].max() - scan["intensity"].min() > 1e-12

    scaled = propagator_lab.ab_interference_scan(c, n_steps=6, flux_grid=[2 * g for g in grid], hbar=2.0)
    assert np.allclose(scaled["intensity"], scan["intensity"])


def test_ab_scan_needs_one_hole():
    with pytest.raises(TopologyError):
        propagator_lab.ab_interference_scan(loader.fixture("wedge").complex, flux_grid=[0.0])


def test_exchange_statistics_on_kite():
    """Boson symmetric, fermion antisymmetric, and boson = quotient-graph propagator"""
    base = loader.fixture("two_particle").complex
    rule = propagator_lab.default_step_rule(base)
    report = propagator_lab.exchange_statistics_demo(base, 4, rule)
    assert report.boson_symmetry_residual < 1e-12
    assert report.fermion_antisymmetry_residual < 1e-12
    assert report.sector_sum_residual < 1e-12
    assert report.quotient_residual < 1e-12

    quotient, unordered = propagator_lab.quotient_propagator(base, rule, 4)
    index = {pair: i for i, pair in enumerate(report.pair_labels)}
    for i, target in enumerate(unordered):
        for j, source in enumerate(unordered):
            assert report.boson[index[target], index[source]] == pytest.approx(quotient[i, j])


def test_exchange_on_two_sites():
    """Two sites give a pair graph without edges; nothing can exchange"""
    base = CWComplex(n_vertices=2, edges=[(0, 1)])
    report = propagator_lab.exchange_statistics_demo(base, 3)
    assert report.pair_labels == ((0, 1), (1, 0))
    assert np.allclose(report.exchange, np.flipud(np.diag(np.diag(report.direct))))


def test_lift_invariance():
    """Random non-horizontal lifts reproduce the glued factor"""
    doc = loader.fixture("annulus_atlas")
    for path in loader.paths(doc.complex, doc.paths):
        report = propagator_lab.lift_invariance_check(doc.complex, path, doc.atlas, 1.0, n_random_lifts=12, seed=7)
        assert report.max_deviation < 1e-9
        assert len(report.values) == 12


def test_lift_of_empty_path():
    doc = loader.fixture("annulus_atlas")
    path = EdgePath(start=2)
    report = propagator_lab.lift_invariance_check(doc.complex, path, doc.atlas, 1.0, n_random_lifts=3)
    assert report.reference == pytest.approx(1.0)
    assert report.max_deviation < 1e-12


def test_regauge_wavefunction():
    """psi_1 = exp(-i phi_01) psi_0 on the overlap"""
    atlas = loader.fixture("annulus_atlas").atlas
    psi = WaveFunction(chart=0, amplitudes={1: 1.0, 4: 0.5j})
    moved = propagator_lab.regauge_wavefunction(psi, 0, 1, atlas)
    assert moved.chart == 1
    assert moved.amplitudes[1] == pytest.approx(cmath.exp(-0.1j))
    assert moved.amplitudes[4] == pytest.approx(0.5j * cmath.exp(-1.2j))
    back = propagator_lab.regauge_wavefunction(moved, 1, 0, atlas)
    assert back.amplitudes[4] == pytest.approx(0.5j)
    with pytest.raises(OverlapError):
        propagator_lab.regauge_wavefunction(WaveFunction(chart=0, amplitudes={2: 1.0}), 0, 1, atlas)


def test_glued_factor_is_gauge_covariant_under_chart_change():
    """Starting and ending in chart 1 instead of chart 0 divides the factor by C_01"""
    doc = loader.fixture("annulus_atlas")
    c, atlas = doc.complex, doc.atlas
    path = complex_model.make_path(c, 0, [(0, 1), (1, 1), (2, 1), (3, 1)])
    in_zero = prequant_bundle.feynman_factor_glued(c, path, atlas, 1.0, start_chart=0, end_chart=0)
    in_one = prequant_bundle.feynman_factor_glued(c, path, atlas, 1.0, start_chart=1, end_chart=1)
    ratio = prequant_bundle.endpoint_transition_ratio(atlas, 0, 1, path.start, path.end)
    assert in_zero.value == pytest.approx(ratio * in_one.value)


def test_random_lifts_on_random_paths():
    """Ten arbitrary lifts of twenty random paths all give the glued factor"""
    doc = loader.fixture("annulus_atlas")
    c, atlas = doc.complex, doc.atlas
    rng = np.random.default_rng(2)
    for trial in range(20):
        start = vertex = int(rng.integers(c.n_vertices))
        steps = []
        for _ in range(int(rng.integers(1, 20))):
            direction = 1 if rng.random() < 0.5 else -1
            edge = vertex if direction == 1 else (vertex - 1) % c.n_vertices
            steps.append((edge, direction))
            vertex = complex_model.step_endpoints(c, edge, direction)[1]
        path = complex_model.make_path(c, start, steps)
        report = propagator_lab.lift_invariance_check(c, path, atlas, 1.0, n_random_lifts=10, seed=trial)
        assert report.max_deviation < 1e-10


def test_sector_basepoint_out_of_range():
    c = ring(6)
    with pytest.raises(InvalidParameterError):
        propagator_lab.sector_propagators(c, propagator_lab.default_step_rule(c), 2, basepoint=9)
