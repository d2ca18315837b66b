import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from stablechaos.bounds import band_constant, band_intensity
from stablechaos.noise import (
    BoxDomain,
    NoiseField,
    StableParams,
    big_atom_rate,
    classify_type,
    compensator_density,
    discarded_mass,
    field_from_csv,
    field_to_csv,
    sample_field,
    scale_atom,
    total_intensity,
    truncate_large,
)


def levy_density(params):
    return lambda y: params.c_p * y ** -(params.p + 1)


def test_total_intensity_matches_quadrature():
    params = StableParams(0.5, 1.0, 0.25, 4.0)
    quad, _ = integrate.quad(levy_density(params), 0.25, 4.0, epsrel=1e-13)
    assert total_intensity(params, BoxDomain.unit(1)) == pytest.approx(3.0, rel=1e-14)
    assert quad == pytest.approx(3.0, rel=1e-12)


def test_total_intensity_scales_with_volume():
    params = StableParams(0.5)
    box = BoxDomain((0.0, 0.0), (2.0, 0.5))
    assert total_intensity(params, box) == pytest.approx(3.0)


def test_empty_band_has_no_atoms():
    params = StableParams(0.5, eps=1.0, K=1.0)
    assert total_intensity(params, BoxDomain.unit(1)) == 0.0
    assert len(sample_field(params, BoxDomain.unit(2), seed=5)) == 0


def test_band_intensity_type_zero():
    params = StableParams(0.5)
    quad, _ = integrate.quad(levy_density(params), 0.5, 1.0, epsrel=1e-13)
    assert band_constant(params) == pytest.approx(2 * (math.sqrt(2) - 1), rel=1e-14)
    assert band_intensity(1.0, 0, params) == pytest.approx(quad, rel=1e-12)
    assert band_intensity(1.0, 0, params) == pytest.approx(0.828427, abs=1e-6)


@pytest.mark.parametrize("n", [-2, 0, 1, 3])
def test_band_intensity_equals_band_integral(n):
    params = StableParams(0.7)
    quad, _ = integrate.quad(levy_density(params), 2.0 ** -(n + 1), 2.0**-n, epsrel=1e-13)
    assert band_intensity(2.5, n, params) == pytest.approx(2.5 * quad, rel=1e-11)


@pytest.mark.parametrize("mass, expected", [(1.0, 0), (0.3, 1), (8.0, -3), (0.5, 1), (0.5000001, 0), (4.0, -2)])
def test_classify_type(mass, expected):
    assert classify_type(mass) == expected


@given(st.floats(min_value=1e-6, max_value=1e6, allow_nan=False))
def test_classify_type_brackets_mass(mass):
    n = classify_type(mass)
    assert 2.0 ** -(n + 1) < mass <= 2.0**-n


def test_compensator_density_example():
    params = StableParams(1.5, 1.0, 0.25, 4.0)
    quad, _ = integrate.quad(lambda y: y * levy_density(params)(y), 0.25, 4.0, epsrel=1e-13)
    assert compensator_density(params) == pytest.approx(3.0, rel=1e-14)
    assert quad == pytest.approx(3.0, rel=1e-12)
    assert compensator_density(StableParams(1.5, eps=2.0, K=2.0)) == 0.0
    with pytest.raises(ValueError):
        compensator_density(StableParams(0.5))


def test_big_atom_rate_matches_tail_integral():
    params = StableParams(0.5, 1.0, 0.25, 4.0)
    quad, _ = integrate.quad(levy_density(params), 4.0, np.inf, epsrel=1e-12)
    assert big_atom_rate(params) == pytest.approx(1.0, rel=1e-14)
    assert quad == pytest.approx(1.0, rel=1e-10)


def test_discarded_mass():
    params = StableParams(0.5, eps=0.25)
    quad, _ = integrate.quad(lambda y: y * levy_density(params)(y), 0, 0.25, epsrel=1e-12)
    assert discarded_mass(params, BoxDomain.unit(1)) == pytest.approx(quad, rel=1e-9)
    assert discarded_mass(StableParams(1.5), BoxDomain.unit(1)) == math.inf


def test_params_validation():
    with pytest.raises(ValueError, match="p = 1 is excluded"):
        StableParams(1.0)
    for bad in (0.0, 2.0, -1.0):
        with pytest.raises(ValueError):
            StableParams(bad)
    with pytest.raises(ValueError):
        StableParams(0.5, eps=2.0, K=1.0)
    with pytest.raises(ValueError):
        StableParams(0.5, c_p=0.0)
    assert StableParams(0.5, K=4.0).N == 2
    with pytest.raises(ValueError):
        StableParams(0.5, K=3.0).N


def test_field_validation():
    params, dom = StableParams(0.5), BoxDomain.unit(1)
    with pytest.raises(ValueError, match="outside"):
        NoiseField.from_arrays(params, dom, [[0.5]], [5.0])
    with pytest.raises(ValueError, match="strictly inside"):
        NoiseField.from_arrays(params, dom, [[1.0]], [1.0])
    with pytest.raises(ValueError, match="distinct"):
        NoiseField.from_arrays(params, dom, [[0.5], [0.5]], [1.0, 2.0])


def test_atoms_sorted_by_decreasing_mass():
    params, dom = StableParams(0.5), BoxDomain.unit(1)
    fld = NoiseField.from_arrays(params, dom, [[0.1], [0.2], [0.3]], [0.5, 2.0, 2.0])
    np.testing.assert_array_equal(fld.masses, [2.0, 2.0, 0.5])
    np.testing.assert_array_equal(fld.locations[:, 0], [0.2, 0.3, 0.1])
    with pytest.raises(ValueError):
        fld.masses[0] = 1.0


def test_sample_field_pure_in_seed():
    params, dom = StableParams(0.8, eps=0.05), BoxDomain.unit(2)
    a, b = sample_field(params, dom, 42), sample_field(params, dom, 42)
    assert a == b
    np.testing.assert_array_equal(a.locations, b.locations)
    assert sample_field(params, dom, 43) != a


@settings(max_examples=30, deadline=None)
@given(
    st.integers(0, 2**32),
    st.sampled_from([0.3, 0.5, 0.9, 1.3, 1.7]),
    st.sampled_from([(0.25, 4.0), (0.01, 1.0), (0.1, 8.0)]),
)
def test_sampled_masses_in_band_with_consistent_types(seed, p, band):
    params = StableParams(p, eps=band[0], K=band[1])
    fld = sample_field(params, BoxDomain.unit(2), seed)
    assert np.all((fld.masses > params.eps) & (fld.masses <= params.K))
    assert [classify_type(y) for y in fld.masses] == list(fld.type_indices)
    assert np.all(BoxDomain.unit(2).contains(fld.locations, closed=False))
    assert len(np.unique(fld.locations[:, 0])) == len(fld)


def test_sample_field_compensation():
    params = StableParams(1.5)
    fld = sample_field(params, BoxDomain.unit(1), 3, compensate=True)
    assert fld.compensator_density == pytest.approx(3.0)
    with pytest.raises(ValueError):
        sample_field(StableParams(0.5), BoxDomain.unit(1), 3, compensate=True)


def test_type_band_counts_match_intensity():
    # mean count per band over many fields within 4 standard errors
    params, dom = StableParams(0.5, eps=2**-5, K=4.0), BoxDomain.unit(1)
    R = 3000
    counts = np.zeros((R, 7))
    for r in range(R):
        types = sample_field(params, dom, 10_000 + r).type_indices
        for j, n in enumerate(range(-2, 5)):
            counts[r, j] = np.sum(types == n)
    for j, n in enumerate(range(-2, 5)):
        lam = band_intensity(1.0, n, params)
        se = math.sqrt(lam / R)
        assert abs(counts[:, j].mean() - lam) < 4 * se, n


def test_truncate_large():
    params, dom = StableParams(0.5), BoxDomain.unit(1)
    fld = NoiseField.from_arrays(params, dom, [[0.2], [0.7]], [0.5, 3.0])
    np.testing.assert_array_equal(truncate_large(fld, 1.0).masses, [0.5])
    assert truncate_large(fld, 3.0) is fld
    assert len(truncate_large(fld, 0.49)) == 0


@given(st.floats(0.3, 4.0), st.floats(0.3, 4.0))
def test_truncate_large_composes_to_min(k1, k2):
    params, dom = StableParams(0.5), BoxDomain.unit(1)
    fld = NoiseField.from_arrays(params, dom, [[0.1], [0.3], [0.5], [0.8]], [0.4, 1.0, 2.2, 3.9])
    assert truncate_large(truncate_large(fld, k1), k2) == truncate_large(fld, min(k1, k2))


def test_scale_atom():
    params, dom = StableParams(0.5), BoxDomain.unit(1)
    fld = NoiseField.from_arrays(params, dom, [[0.2], [0.7]], [0.3, 2.0])
    i = int(np.flatnonzero(fld.masses == 0.3)[0])
    out = scale_atom(fld, i, 1.5)
    assert out.masses[i] == pytest.approx(0.45)
    assert out.type_indices[i] == 1
    assert scale_atom(fld, 0, 1.0) == fld
    with pytest.raises(ValueError):
        scale_atom(fld, 0, 2.0)
    big = NoiseField.from_arrays(params, dom, [[0.5]], [3.0])
    with pytest.raises(ValueError, match="exceeds K"):
        scale_atom(big, 0, 1.5)


def test_csv_round_trip():
    params, dom = StableParams(0.5, eps=0.01), BoxDomain.unit(2)
    fld = sample_field(params, dom, 9)
    text = field_to_csv(fld)
    assert text.splitlines()[0] == "atom_index,x_1,x_2,mass,type_index"
    back = field_from_csv(text, params, dom)
    np.testing.assert_array_equal(back.locations, fld.locations)
    np.testing.assert_array_equal(back.masses, fld.masses)


def test_empty_field_csv_is_header_only():
    fld = sample_field(StableParams(0.5, eps=1.0, K=1.0), BoxDomain.unit(1), 0)
    assert field_to_csv(fld) == "atom_index,x_1,mass,type_index\n"


def test_mass_law_ks():
    params = StableParams(0.5, eps=0.25, K=4.0)
    masses = np.concatenate([sample_field(params, BoxDomain.unit(1), s).masses for s in range(800)])
    a, b = params.eps**-params.p, params.K**-params.p
    cdf = lambda y: (a - y**-params.p) / (a - b)
    res = stats.kstest(masses, cdf)
    assert res.pvalue > 0.01
