import numpy as np
import pytest
from hypothesis import given, strategies as st

from ou_inverse import Field, GridSpec
from ou_inverse.errors import GridMismatch, ResolutionTooCoarse
from ou_inverse.field import inner, norm_l2
from ou_inverse.thickset import (ObservationMask, ThickSetSpec, build_mask, check_thickness,
                                 read_mask, restrict, window_fractions, write_mask)

G1 = GridSpec(1, 8.0, 256)
G2 = GridSpec(2, 4.0, 64)


class TestBuild:
    def test_full(self):
        m = build_mask(ThickSetSpec("full"), G2)
        assert m.is_full and m.certificate.lam == 1.0

    def test_slabs_pattern(self):
        m = build_mask(ThickSetSpec("periodic_slabs", 1.0, 0.5), G1)
        expected = np.mod(G1.x, 1.0) < 0.5
        assert np.array_equal(m.mask, expected)
        assert (m.certificate.lam, m.certificate.a) == (0.5, (1.0,))

    def test_cubes_certificate(self):
        m = build_mask(ThickSetSpec("periodic_cubes", 2.0, 1.0), G2)
        assert m.certificate.lam == 0.25
        assert m.fraction == pytest.approx(0.25)

    def test_bernoulli_empty_and_seeded(self):
        empty = build_mask(ThickSetSpec("bernoulli_cells", cell=0.5, p=0.0), G2)
        assert not empty.mask.any() and empty.certificate is None
        a = build_mask(ThickSetSpec("bernoulli_cells", cell=0.5, p=0.6, seed=4), G2)
        b = build_mask(ThickSetSpec("bernoulli_cells", cell=0.5, p=0.6, seed=4), G2)
        assert np.array_equal(a.mask, b.mask)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            ThickSetSpec("periodic_slabs", 1.0, 1.5)
        with pytest.raises(ValueError):
            ThickSetSpec("bernoulli_cells", p=1.5)
        with pytest.raises(ValueError):
            ThickSetSpec("stripes")

    def test_custom_shape(self):
        with pytest.raises(GridMismatch):
            build_mask(ThickSetSpec("custom_mask", custom=np.ones(10, bool)), G1)


class TestThickness:
    def test_paper_slab_example(self):
        m = build_mask(ThickSetSpec("periodic_slabs", 1.0, 0.5), G1)
        ok = check_thickness(m, 0.5, [1.0])
        assert ok.passed and ok.worst_fraction == 0.5
        assert not check_thickness(m, 0.6, [1.0]).passed

    def test_full_and_empty(self):
        full = build_mask(ThickSetSpec("full"), G2)
        empty = ObservationMask(G2, np.zeros(G2.shape, bool))
        assert check_thickness(full, 1.0, [1.0, 1.0]).passed
        assert not check_thickness(empty, 0.5, [1.0, 1.0]).passed

    def test_resolution_guard(self):
        m = build_mask(ThickSetSpec("full"), G2)
        with pytest.raises(ResolutionTooCoarse):
            check_thickness(m, 0.5, [0.5, 1.0])

    def test_window_fractions_brute_force(self, rng):
        g = GridSpec(2, 1.0, 16)
        m = ObservationMask(g, rng.random(g.shape) < 0.4)
        fr = window_fractions(m, (5, 3))
        for i in range(16):
            for j in range(16):
                rows = np.arange(i, i + 5) % 16
                cols = np.arange(j, j + 3) % 16
                assert fr[i, j] == pytest.approx(m.mask[np.ix_(rows, cols)].mean())

    def test_subsampled_translates(self):
        m = build_mask(ThickSetSpec("periodic_slabs", 1.0, 0.5), G1)
        assert check_thickness(m, 0.5, [1.0], translates=16).passed

    @given(st.integers(0, 2 ** 31 - 1))
    def test_monotone_in_inclusion(self, seed):
        rng = np.random.default_rng(seed)
        small = rng.random(G2.shape) < 0.5
        big = small | (rng.random(G2.shape) < 0.3)
        a = [1.0, 1.0]
        r_small = check_thickness(ObservationMask(G2, small), 0.4, a)
        r_big = check_thickness(ObservationMask(G2, big), 0.4, a)
        assert r_big.worst_fraction >= r_small.worst_fraction
        assert r_big.passed or not r_small.passed

    def test_bernoulli_smoke(self):
        g = GridSpec(2, 8.0, 64)
        passed = 0
        for seed in range(100):
            m = build_mask(ThickSetSpec("bernoulli_cells", cell=4 * g.h, p=0.7, seed=seed), g)
            passed += check_thickness(m, 0.35, [32 * g.h] * 2).passed
        assert passed >= 99


class TestRestrict:
    def test_projection(self, rng):
        m = build_mask(ThickSetSpec("periodic_slabs", 1.0, 0.5), G1)
        f = Field(G1, rng.standard_normal(256) + 1j * rng.standard_normal(256))
        h = Field(G1, rng.standard_normal(256))
        once = restrict(f, m)
        assert np.array_equal(restrict(once, m).values, once.values)
        assert inner(once, h) == inner(f, restrict(h, m))
        assert norm_l2(once) <= norm_l2(f)

    def test_full_and_empty(self, rng):
        f = Field(G1, rng.standard_normal(256))
        assert np.array_equal(restrict(f, build_mask(ThickSetSpec("full"), G1)).values, f.values)
        empty = ObservationMask(G1, np.zeros(256, bool))
        assert not restrict(f, empty).values.any()

    def test_grid_mismatch(self):
        with pytest.raises(GridMismatch):
            restrict(Field(G2, np.zeros(G2.shape)), build_mask(ThickSetSpec("full"), G1))


class TestFiles:
    @pytest.mark.parametrize("kind", ["full", "periodic_cubes", "bernoulli_cells"])
    def test_round_trip(self, tmp_path, kind):
        m = build_mask(ThickSetSpec(kind, period=2.0, width=1.0, cell=0.5, p=0.5, seed=3), G2)
        p = tmp_path / "m.msk"
        write_mask(p, m)
        assert p.read_bytes()[:6] == b"OUMSK1"
        back = read_mask(p)
        assert back.grid == G2 and np.array_equal(back.mask, m.mask)

    def test_empty_round_trip(self, tmp_path):
        m = ObservationMask(G1, np.zeros(256, bool))
        write_mask(tmp_path / "e.msk", m)
        assert not read_mask(tmp_path / "e.msk").mask.any()
