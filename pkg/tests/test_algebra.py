import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

import aoc
from aoc.algebra import load_model, make_model, validate_model

E1, E2, E3 = np.eye(3)

vec3 = st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3).map(np.array)


def test_bracket_so3_cross_product(so3_j123):
    assert_allclose(aoc.bracket(so3_j123, E1, E2), E3)
    assert_allclose(aoc.bracket(so3_j123, E2, E3), E1)
    assert_allclose(aoc.bracket(so3_j123, E3, E1), E2)


def test_bracket_of_vector_with_itself_vanishes(so3_j123, rng):
    y = rng.standard_normal(3)
    assert_allclose(aoc.bracket(so3_j123, y, y), 0.0, atol=1e-14)


def test_bracket_abelian_is_zero(abelian3, rng):
    y, z = rng.standard_normal((2, 3))
    assert_allclose(aoc.bracket(abelian3, y, z), 0.0)


@given(y=vec3, z=vec3, w=vec3, a=st.floats(-3, 3), b=st.floats(-3, 3))
@settings(max_examples=50, deadline=None)
def test_bracket_bilinear_antisymmetric(y, z, w, a, b):
    m = aoc.so3_model((1.0, 2.0, 3.0))
    lhs = aoc.bracket(m, a * y + b * z, w)
    rhs = a * aoc.bracket(m, y, w) + b * aoc.bracket(m, z, w)
    assert_allclose(lhs, rhs, atol=1e-10)
    assert_allclose(aoc.bracket(m, y, z), -aoc.bracket(m, z, y), atol=1e-12)


def test_ad_star_matches_hand_cross_product(so3_j123):
    # <ad*_y mu, z> = <mu, [y, z]> reproduces mu x y on so(3)
    out = aoc.ad_star(so3_j123, E3, E1)
    assert_allclose(out, np.cross(E1, E3), atol=1e-15)
    assert_allclose(out, [0.0, -1.0, 0.0])


def test_ad_star_abelian_and_parallel(so3_j123, abelian3, rng):
    y, mu = rng.standard_normal((2, 3))
    assert_allclose(aoc.ad_star(abelian3, y, mu), 0.0)
    assert_allclose(aoc.ad_star(so3_j123, E1, E1), 0.0, atol=1e-15)


def test_ad_star_pairing_identity(so3_j123, rng):
    for _ in range(1000):
        y, mu, z = rng.standard_normal((3, 3))
        lhs = np.dot(aoc.ad_star(so3_j123, y, mu), z)
        rhs = np.dot(mu, aoc.bracket(so3_j123, y, z))
        assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(rhs))


def test_ad_star_is_mu_cross_y_for_any_diagonal_inertia(rng):
    for diag in ([1.0, 1.0, 1.0], [2.0, 0.5, 7.0]):
        m = aoc.so3_model(diag)
        for _ in range(200):
            y, mu = rng.standard_normal((2, 3))
            assert_allclose(aoc.ad_star(m, y, mu), np.cross(mu, y), atol=1e-12)


def test_flat_sharp_diagonal(so3_j123):
    assert_allclose(aoc.flat(so3_j123, [1.0, 1.0, 1.0]), [1.0, 2.0, 3.0])
    assert_allclose(aoc.sharp(so3_j123, [1.0, 2.0, 3.0]), [1.0, 1.0, 1.0])


def test_flat_identity_inertia(so3_unit, rng):
    y = rng.standard_normal(3)
    assert_allclose(aoc.flat(so3_unit, y), y)


def test_sharp_flat_roundtrip(so3_j123, abelian3, rng):
    for model in (so3_j123, abelian3):
        ys = rng.standard_normal((100, model.n))
        assert_allclose(aoc.sharp(model, aoc.flat(model, ys)), ys, atol=1e-12)


def test_connection_abelian_zero(abelian3, rng):
    y, z = rng.standard_normal((2, 3))
    assert_allclose(aoc.connection_bilinear(abelian3, y, z), 0.0)


def test_connection_biinvariant_is_half_bracket(so3_unit):
    assert_allclose(aoc.connection_bilinear(so3_unit, E1, E2), [0.0, 0.0, 0.5])


def test_connection_diagonal_is_minus_bias(so3_j123, rng):
    y = rng.standard_normal(3)
    assert_allclose(aoc.connection_bilinear(so3_j123, y, y), -aoc.bias(so3_j123, y),
                    atol=1e-14)


def test_connection_torsion_free(so3_j123, abelian3, rng):
    for model in (so3_j123, abelian3):
        y, z = rng.standard_normal((2, 1000, model.n))
        res = (aoc.connection_bilinear(model, y, z) - aoc.connection_bilinear(model, z, y)
               - aoc.bracket(model, y, z))
        assert np.abs(res).max() < 1e-10


def test_connection_metric_compatible(so3_j123, abelian3, rng):
    for model in (so3_j123, abelian3):
        for _ in range(1000):
            w, y, z = rng.standard_normal((3, model.n))
            lhs = np.dot(aoc.flat(model, aoc.connection_bilinear(model, w, y)), z)
            rhs = np.dot(aoc.flat(model, y), aoc.connection_bilinear(model, w, z))
            assert abs(lhs + rhs) < 1e-10


def test_bias_principal_axis(so3_j123):
    assert_allclose(aoc.bias(so3_j123, E1), 0.0, atol=1e-15)


def test_bias_hand_value(so3_j123):
    # (J y) x y = (0, 0, -1) for y = (1, 1, 0), then J^{-1}
    assert_allclose(aoc.bias(so3_j123, [1.0, 1.0, 0.0]), [0.0, 0.0, -1.0 / 3.0])


def test_bias_identity_inertia_vanishes(so3_unit, rng):
    ys = rng.standard_normal((1000, 3))
    assert np.abs(aoc.bias(so3_unit, ys)).max() < 1e-12


def test_restrict_covector(so3_m2, so3_j123):
    assert_allclose(aoc.restrict_covector(so3_m2, [5.0, 7.0, 9.0]), [5.0, 7.0, 0.0])
    assert_allclose(aoc.restrict_covector(so3_j123, [5.0, 7.0, 9.0]), [5.0, 7.0, 9.0])
    assert_allclose(aoc.restrict_covector(so3_m2, np.zeros(3)), 0.0)


def test_embed_control_pads(so3_m2):
    assert_allclose(aoc.embed_control(so3_m2, [4.0, 5.0]), [4.0, 5.0, 0.0])
    with pytest.raises(aoc.DimensionMismatch):
        aoc.embed_control(so3_m2, [1.0, 2.0, 3.0])


def test_dimension_mismatch_raises(so3_j123):
    with pytest.raises(aoc.DimensionMismatch):
        aoc.bracket(so3_j123, [1.0, 0.0], [0.0, 1.0, 0.0])


def test_validate_builtin_models(so3_j123, abelian3):
    for model in (so3_j123, abelian3):
        report = validate_model(model)
        assert report.passed
        assert report.max_residual < 1e-12


def test_validate_reports_antisymmetry_failure():
    C = np.zeros((3, 3, 3))
    C[2, 0, 1] = 1.0  # partner entry C[2,1,0] missing
    model = make_model(3, 3, C, np.eye(3), strict=False)
    report = validate_model(model)
    assert "antisymmetry" in report.failures()


def test_validate_reports_indefinite_inertia():
    model = make_model(2, 2, np.zeros((2, 2, 2)), np.diag([1.0, -1.0]), strict=False)
    report = validate_model(model)
    assert "inertia_positive" in report.failures()


def test_validate_reports_adapted_basis_failure():
    inertia = np.array([[1.0, 0.0, 0.3], [0.0, 1.0, 0.0], [0.3, 0.0, 1.0]])
    model = make_model(3, 2, np.zeros((3, 3, 3)), inertia, strict=False)
    report = validate_model(model)
    assert "adapted_basis" in report.failures()


def test_strict_construction_rejects_bad_model():
    C = np.zeros((3, 3, 3))
    C[2, 0, 1] = 1.0
    with pytest.raises(ValueError):
        make_model(3, 3, C, np.eye(3))
    with pytest.raises(ValueError):
        make_model(3, 4, np.zeros((3, 3, 3)), np.eye(3))


def test_kinetic_energy(so3_j123):
    assert aoc.kinetic_energy(so3_j123, [1.0, 1.0, 1.0]) == pytest.approx(3.0)


def test_load_model_roundtrip(tmp_path):
    triples = []
    eps = {(0, 1, 2): 1.0, (1, 2, 0): 1.0, (2, 0, 1): 1.0,
           (0, 2, 1): -1.0, (2, 1, 0): -1.0, (1, 0, 2): -1.0}
    for (i, j, k), v in eps.items():
        triples.append([k + 1, i + 1, j + 1, v])
    data = {"n": 3, "m": 2, "structure_constants": triples,
            "inertia": np.diag([1.0, 2.0, 3.0]).tolist()}
    path = tmp_path / "so3.json"
    path.write_text(json.dumps(data))
    model, rep = load_model(path)
    assert rep is None
    assert validate_model(model).passed
    ref = aoc.so3_model((1.0, 2.0, 3.0), m=2)
    assert_allclose(model.C, ref.C)


def test_load_model_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"n": 1, "m": 1, "inertia": [[1.0]], "bogus": 1}))
    with pytest.raises(ValueError, match="unknown keys"):
        load_model(path)


def test_load_model_rejects_bad_indices(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"n": 2, "m": 1, "inertia": [[1.0, 0.0], [0.0, 1.0]],
                                "structure_constants": [[3, 1, 2, 1.0]]}))
    with pytest.raises(ValueError, match="out of range"):
        load_model(path)
