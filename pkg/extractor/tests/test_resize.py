from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from extractor.resize import grid_shape, round_half_down_ratio, scaled_size


def oracle_half_down(numer: int, denom: int) -> int:
    value = Fraction(numer, denom)
    floor = value.numerator // value.denominator
    return floor + (1 if value - floor > Fraction(1, 2) else 0)


class TestRoundHalfDown:
    def test_plain_cases(self):
        assert round_half_down_ratio(13, 5) == 3
        assert round_half_down_ratio(12, 5) == 2
        assert round_half_down_ratio(8, 4) == 2

    def test_exact_half_goes_down(self):
        assert round_half_down_ratio(5, 2) == 2
        assert round_half_down_ratio(7, 2) == 3
        assert round_half_down_ratio(1, 2) == 0

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            round_half_down_ratio(3, 0)
        with pytest.raises(ValueError):
            round_half_down_ratio(-1, 2)

    @given(st.integers(0, 10**7), st.integers(1, 10**5))
    def test_matches_exact_rational_oracle(self, numer, denom):
        assert round_half_down_ratio(numer, denom) == oracle_half_down(numer, denom)


class TestScaledSize:
    def test_landscape_example(self):
        assert scaled_size(800, 600, 20, 16) == (320, 240)

    def test_portrait_mirror(self):
        assert scaled_size(600, 800, 20, 16) == (240, 320)

    def test_square(self):
        assert scaled_size(400, 400, 18, 16) == (288, 288)

    def test_two_to_one(self):
        assert scaled_size(700, 350, 19, 16) == (304, 152)

    def test_exact_half_pixel_rounds_down(self):
        # 25 * 320 / 640 = 12.5
        assert scaled_size(640, 25, 20, 16) == (320, 12)

    def test_short_axis_never_collapses(self):
        assert scaled_size(4000, 1, 18, 16) == (288, 1)

    def test_rejects_degenerate_inputs(self):
        with pytest.raises(ValueError):
            scaled_size(0, 10, 5, 16)
        with pytest.raises(ValueError):
            scaled_size(10, 10, 0, 16)
        with pytest.raises(ValueError):
            scaled_size(10, 10, 5, 0)

    @given(
        st.integers(1, 4000),
        st.integers(1, 4000),
        st.integers(1, 30),
        st.sampled_from([8, 16, 32]),
    )
    def test_long_axis_lands_exactly(self, width, height, tag, reduction):
        out_w, out_h = scaled_size(width, height, tag, reduction)
        assert max(out_w, out_h) == reduction * tag
        assert min(out_w, out_h) >= 1
        assert (out_w >= out_h) == (width >= height)


class TestGridShape:
    def test_exact_multiples(self):
        assert grid_shape(320, 240, 16) == (15, 20)

    def test_ceil_on_remainder(self):
        assert grid_shape(130, 250, 16) == (16, 9)

    @given(st.integers(1, 2000), st.integers(1, 2000))
    def test_matches_ceil(self, width, height):
        rows, cols = grid_shape(width, height, 16)
        assert rows == -(-height // 16)
        assert cols == -(-width // 16)
