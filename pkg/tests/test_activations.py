import mpmath
import numpy as np
import pytest

from ridgearb.activations import Activation, activate, activate_grad, equal_split

mpmath.mp.dps = 40


def _mp(kind, z):
    z = mpmath.mpf(z)
    sig = 1 / (1 + mpmath.e ** (-z))
    if kind == "silu":
        return z * sig
    if kind == "gelu":
        return z * (1 + mpmath.erf(z / mpmath.sqrt(2))) / 2
    if kind == "mish":
        return z * mpmath.tanh(mpmath.log1p(mpmath.e ** z))
    if kind == "tanh":
        return mpmath.tanh(z)
    if kind == "sigmoid":
        return sig
    return max(z, 0)


def test_zero_fixed_points():
    for kind in ("silu", "gelu", "mish"):
        assert activate(kind, 0.0) == 0.0


def test_relu_values():
    assert activate("relu", -3.0) == 0.0
    assert activate("relu", 2.0) == 2.0
    assert activate_grad("relu", 0.0) == 0.0


def test_silu_one_against_high_precision():
    expected = float(mpmath.mpf(1) / (1 + mpmath.e ** -1))
    assert activate("silu", 1.0) == pytest.approx(expected, rel=1e-15)
    assert activate("silu", 1.0) == pytest.approx(0.7310585786300049, rel=1e-15)


@pytest.mark.parametrize("kind", ["relu", "silu", "gelu", "mish", "tanh", "sigmoid"])
def test_values_and_derivatives_against_mpmath(kind):
    for z in np.linspace(-6, 6, 25) + 0.013:
        assert float(activate(kind, z)) == pytest.approx(float(_mp(kind, z)), rel=1e-12, abs=1e-14)
        d = mpmath.diff(lambda t: _mp(kind, t), z)
        assert float(activate_grad(kind, z)) == pytest.approx(float(d), rel=1e-10, abs=1e-12)


def test_equal_split_remainder_to_first_group():
    assert equal_split(10) == [("relu", 4), ("silu", 2), ("gelu", 2), ("mish", 2)]
    assert sum(c for _, c in equal_split(7)) == 7


def test_hybrid_applies_each_group_to_its_slice():
    act = Activation.hybrid(8)
    z = np.linspace(-2, 2, 8)[None, :]
    out = act(z)
    assert np.allclose(out[0, :2], activate("relu", z[0, :2]))
    assert np.allclose(out[0, 2:4], activate("silu", z[0, 2:4]))
    assert np.allclose(out[0, 6:], activate("mish", z[0, 6:]))
    assert Activation.from_dict(act.to_dict()) == act


def test_unknown_activation_rejected():
    with pytest.raises(ValueError):
        Activation("swish2")
