import math

import pytest

from docubits.animation import Appearance, BodyTint, Indicator, appearance
from docubits.bits import Status


class TestClosedForms:
    def test_not_attempted_is_plain_white(self):
        a = appearance(Status.NOT_ATTEMPTED, 3.0)
        assert a == Appearance(0.0, 1.0, BodyTint.WHITE, Indicator.NONE_LIT)

    def test_in_progress_shows_amber(self):
        a = appearance(Status.IN_PROGRESS, 0.5)
        assert a == Appearance(0.0, 1.0, BodyTint.WHITE, Indicator.AMBER)

    def test_completed_at_zero(self):
        a = appearance(Status.COMPLETED, 0.0)
        assert a.vertical_offset == 0.0
        assert a.opacity == 1.0
        assert a.body_tint is BodyTint.GRAY
        assert a.indicator is Indicator.GREEN

    def test_completed_clamps_by_ten_seconds(self):
        a = appearance(Status.COMPLETED, 10.0)
        assert a.vertical_offset == pytest.approx(0.5, abs=1e-12)
        assert a.opacity == pytest.approx(0.35, abs=1e-12)

    def test_completed_mid_rise(self):
        a = appearance(Status.COMPLETED, 2.0)
        assert a.vertical_offset == pytest.approx(0.3, abs=1e-12)
        assert a.opacity == pytest.approx(0.6, abs=1e-12)

    def test_blocked_bounce_peak(self):
        a = appearance(Status.BLOCKED, 0.25)
        assert a.vertical_offset == pytest.approx(0.05 * abs(math.sin(math.pi / 2)), abs=1e-12)
        assert a.indicator is Indicator.RED
        assert a.opacity == 1.0

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            appearance(Status.BLOCKED, -0.1)


class TestProperties:
    def test_completed_monotone_and_clamped(self):
        times = [i * 0.01 for i in range(0, 1200)]
        prev_off, prev_op = -1.0, 2.0
        for t in times:
            a = appearance(Status.COMPLETED, t)
            assert a.vertical_offset >= prev_off - 1e-15
            assert a.opacity <= prev_op + 1e-15
            prev_off, prev_op = a.vertical_offset, a.opacity
            if t >= 10.0 / 3.0:
                assert a.vertical_offset == 0.5
                assert a.opacity == 0.35

    def test_blocked_bounded_with_half_second_period(self):
        for i in range(2000):
            t = i * 0.003
            a = appearance(Status.BLOCKED, t)
            assert 0.0 <= a.vertical_offset <= 0.05
            mirrored = appearance(Status.BLOCKED, t + 0.5)
            assert mirrored.vertical_offset == pytest.approx(
                a.vertical_offset, abs=1e-9
            )

    def test_determinism_bitwise(self):
        for status in Status:
            for i in range(100):
                t = i * 0.137
                assert appearance(status, t) == appearance(status, t)

    def test_indicator_honesty(self):
        for status in Status:
            for t in (0.0, 0.7, 5.0):
                a = appearance(status, t)
                assert (a.indicator is Indicator.GREEN) == (status is Status.COMPLETED)
                assert (a.indicator is Indicator.RED) == (status is Status.BLOCKED)
