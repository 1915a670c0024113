import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from goqsm.codec import (
    Scheme,
    SmConfig,
    SmFrame,
    bits_to_symbols,
    constellation,
    demap_frame,
    map_bits,
    spectral_efficiency,
    symbols_to_bits,
    transmit_vectors,
)
from oracles import all_bit_blocks

GOQSM3 = SmConfig(Scheme.GOQSM, 4, 2, 4)
GOSM3 = SmConfig(Scheme.GOSM, 4, 2, 16)


class TestSpectralEfficiency:
    @pytest.mark.parametrize(
        "scheme, m, expected",
        [
            ("GOQSM", 4, 3), ("GOQSM", 16, 4), ("GOQSM", 64, 5),
            ("GOSM", 16, 3), ("GOSM", 64, 4), ("GOSM", 256, 5),
        ],
    )
    def test_table(self, scheme, m, expected):
        assert spectral_efficiency(SmConfig(scheme, 4, 2, m)) == expected

    @pytest.mark.parametrize(
        "scheme, se, m",
        [("GOQSM", 3, 4), ("GOQSM", 4, 16), ("GOQSM", 5, 64), ("GOSM", 3, 16), ("GOSM", 4, 64), ("GOSM", 5, 256)],
    )
    def test_inversion(self, scheme, se, m):
        assert SmConfig.for_spectral_efficiency(scheme, se).qam_order == m

    def test_unreachable_efficiency(self):
        with pytest.raises(ValueError):
            SmConfig.for_spectral_efficiency("GOQSM", 2)

    @pytest.mark.parametrize("n_tx, n_active", [(4, 1), (4, 2), (5, 2), (6, 3), (8, 4)])
    @pytest.mark.parametrize("m", [4, 16, 64])
    def test_goqsm_doubles_spatial_bits(self, n_tx, n_active, m):
        q = spectral_efficiency(SmConfig("GOQSM", n_tx, n_active, m))
        g = spectral_efficiency(SmConfig("GOSM", n_tx, n_active, m))
        assert q - g == Fraction(math.floor(math.log2(math.comb(n_tx, n_active))), 2)

    def test_returns_exact_rational(self):
        assert spectral_efficiency(SmConfig("GOSM", 5, 2, 4)) == Fraction(5, 2)


class TestConfig:
    def test_default_pattern_table(self):
        assert GOQSM3.pattern_table == ((0, 1), (0, 2), (0, 3), (1, 2))

    @pytest.mark.parametrize("m", [8, 2, 12, 0])
    def test_rejects_non_square_qam(self, m):
        with pytest.raises(ValueError):
            SmConfig("GOQSM", 4, 2, m)

    def test_rejects_bad_table(self):
        with pytest.raises(ValueError):
            SmConfig("GOQSM", 4, 2, 4, pattern_table=((0, 1), (0, 1), (0, 2), (1, 2)))
        with pytest.raises(ValueError):
            SmConfig("GOQSM", 4, 2, 4, pattern_table=((0, 1), (0, 2)))

    def test_rejects_bad_active_count(self):
        with pytest.raises(ValueError):
            SmConfig("GOQSM", 4, 5, 4)

    def test_block_bits(self):
        assert GOQSM3.block_bits == 6
        assert GOSM3.block_bits == 6
        assert SmConfig.for_spectral_efficiency("GOQSM", 5).block_bits == 10


class TestConstellation:
    def test_qpsk(self):
        pts, a_re, a_im = constellation(GOQSM3)
        s = 1 / math.sqrt(2)
        assert set(map(complex, np.round(pts * math.sqrt(2)))) == {1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j}
        np.testing.assert_allclose(a_re, [-s, s])
        np.testing.assert_allclose(a_im, [-s, s])

    def test_16qam_levels(self):
        _, a_re, _ = constellation(GOSM3)
        np.testing.assert_allclose(a_re, np.array([-3, -1, 1, 3]) / math.sqrt(10), rtol=1e-15)

    @pytest.mark.parametrize("m", [4, 16, 64, 256])
    def test_unit_energy(self, m):
        pts, _, _ = constellation(SmConfig("GOSM", 4, 2, m))
        assert len(set(pts)) == m
        assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("m", [16, 64, 256])
    def test_gray_neighbours(self, m):
        # adjacent points along either axis differ in exactly one label bit
        pts, levels, _ = constellation(SmConfig("GOSM", 4, 2, m))
        step = levels[1] - levels[0]
        for a in range(m):
            for b in range(m):
                d = pts[a] - pts[b]
                if abs(abs(d) - step) < 1e-9:
                    assert bin(a ^ b).count("1") == 1


class TestMapping:
    def test_all_zero_goqsm(self):
        f = map_bits(GOQSM3, [0] * 6)
        b = constellation(GOQSM3)[0][0]
        assert f.b == pytest.approx(b)
        assert (f.z_re, f.z_im) == (0, 0)
        np.testing.assert_allclose(f.c, [b, b, 0, 0])

    def test_quadrature_index(self):
        f = map_bits(GOQSM3, [0, 0, 0, 0, 0, 1])
        assert (f.z_re, f.z_im) == (0, 1)
        assert set(np.flatnonzero(f.c.real)) == {0, 1}
        assert set(np.flatnonzero(f.c.imag)) == {0, 2}
        np.testing.assert_array_equal(demap_frame(GOQSM3, f), [0, 0, 0, 0, 0, 1])

    def test_gosm_shares_symbol(self):
        for bits in all_bit_blocks(6):
            f = map_bits(GOSM3, bits)
            active = np.flatnonzero(f.c)
            assert len(active) == 2
            assert f.c[active[0]] == f.c[active[1]] == f.b
            assert f.z_re == f.z_im

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            map_bits(GOQSM3, [0] * 5)

    def test_demap_rejects_bad_pattern(self):
        f = map_bits(GOQSM3, [0] * 6)
        with pytest.raises(ValueError):
            demap_frame(GOQSM3, SmFrame(f.b, 4, 0, f.c))

    def test_demap_rejects_off_grid_symbol(self):
        f = map_bits(GOQSM3, [0] * 6)
        with pytest.raises(ValueError):
            demap_frame(GOQSM3, SmFrame(f.b + 0.1, 0, 0, f.c))


@pytest.mark.parametrize("scheme", ["GOQSM", "GOSM"])
@pytest.mark.parametrize("se", [3, 4, 5])
def test_exhaustive_round_trip(scheme, se):
    cfg = SmConfig.for_spectral_efficiency(scheme, se)
    blocks = all_bit_blocks(cfg.block_bits)
    sym = bits_to_symbols(cfg, blocks)
    np.testing.assert_array_equal(symbols_to_bits(cfg, sym), blocks)
    c = transmit_vectors(cfg, sym)
    # bijection: distinct blocks give distinct transmit vectors
    assert len({v.tobytes() for v in c}) == len(blocks)
    # N nonzero real and N nonzero imaginary parts on table positions
    assert np.all(np.count_nonzero(c.real, axis=1) == 2)
    assert np.all(np.count_nonzero(c.imag, axis=1) == 2)


@pytest.mark.parametrize("scheme, se", [("GOQSM", 3), ("GOQSM", 5), ("GOSM", 4)])
def test_single_block_api_round_trip(scheme, se):
    cfg = SmConfig.for_spectral_efficiency(scheme, se)
    for bits in all_bit_blocks(cfg.block_bits):
        np.testing.assert_array_equal(demap_frame(cfg, map_bits(cfg, bits)), bits)


@given(st.integers(0, 2**10 - 1))
def test_frame_invariant(value):
    cfg = SmConfig.for_spectral_efficiency("GOQSM", 5)
    bits = [(value >> k) & 1 for k in range(9, -1, -1)]
    f = map_bits(cfg, bits)
    mask_re = np.zeros(4)
    mask_re[list(cfg.pattern_table[f.z_re])] = 1
    mask_im = np.zeros(4)
    mask_im[list(cfg.pattern_table[f.z_im])] = 1
    np.testing.assert_allclose(f.c.real, mask_re * f.b.real)
    np.testing.assert_allclose(f.c.imag, mask_im * f.b.imag)
