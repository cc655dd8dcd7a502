
import numpy as np
import pytest
from hypothesis import given, strategies as st

from pinchnoma import alphabet, demodulate_hard, modulate, qpsk_sign_detect
from pinchnoma.constellation import AXIS_I, AXIS_Q, axis_labels, bits_of, norm_factor, slice_axis


def test_qpsk_table():
    assert modulate((0, 1), 4).value == 1 + 1j
    assert modulate((0, 0), 4).value == 1 - 1j
    assert modulate((1, 0), 4).value == -1 - 1j
    assert modulate((1, 1), 4).value == -1 + 1j


@pytest.mark.parametrize("M", [4, 16, 64, 256])
def test_mean_energy_equals_norm_factor(M):
    pts = np.array([s.value for s in alphabet(M)])
    assert np.mean(np.abs(pts) ** 2) == pytest.approx(norm_factor(M), rel=1e-15)
    assert norm_factor(M) == 2 * (M - 1) / 3


@pytest.mark.parametrize("M", [4, 16, 64])
def test_round_trip_and_bijection(M):
    syms = alphabet(M)
    assert len({s.value for s in syms}) == M
    for s in syms:
        assert modulate(bits_of(s), M) == s


@pytest.mark.parametrize("side", [2, 4, 8, 16])
@pytest.mark.parametrize("axis", [AXIS_I, AXIS_Q])
def test_gray_property(side, axis):
    labels = axis_labels(side, axis)
    for a, b in zip(labels[:-1], labels[1:]):
        assert int(np.sum(a != b)) == 1
    assert len({tuple(r) for r in labels}) == side


@pytest.mark.parametrize("M", [4, 16, 64])
def test_noise_free_detection(M):
    for s in alphabet(M):
        for scale in (1e-9, 0.37, 1.0, 1e6):
            assert demodulate_hard(scale * s.value, M, scale) == s


def test_demodulate_examples():
    assert demodulate_hard(0.9 * 2.0 * (1 + 1j), 4, 2.0).value == 1 + 1j
    assert demodulate_hard(0.0 - 0.5j, 4, 1.0).value == 1 - 1j
    assert demodulate_hard(1.5 * (3.7 + 0.2j), 16, 1.5).value == 3 + 1j
    assert demodulate_hard(1e9 + 1e9j, 16, 1.0).value == 3 + 3j


def test_sign_detect():
    assert qpsk_sign_detect(0.3 - 2j).value == 1 - 1j
    assert qpsk_sign_detect(-1e-300 - 1e-300j).value == -1 - 1j
    assert qpsk_sign_detect(0.0).value == 1 + 1j


def test_slice_axis_ties_go_up():
    # thresholds of 16-QAM at -2, 0, 2 (scale 1)
    assert slice_axis(np.array([-2.0, 0.0, 2.0]), 1.0, 4).tolist() == [1, 2, 3]


def test_modulate_rejects_bad_input():
    with pytest.raises(ValueError):
        modulate((0, 1, 1), 4)
    with pytest.raises(ValueError):
        modulate((0, 1), 8)
    with pytest.raises(ValueError):
        modulate((0, 2), 4)


@given(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
       st.sampled_from([4, 16, 64]), st.floats(0.01, 10.0))
def test_hard_decision_is_nearest_point(y, M, scale):
    got = demodulate_hard(y, M, scale).value
    best = min(abs(y - scale * s.value) for s in alphabet(M))
    assert abs(y - scale * got) <= best + 1e-9 * max(1.0, abs(y))
