"""测试解析公式与 Fock 暴力计算的一致性"""

import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "../..")))

from src.analytics import (
    AncillaQubit,
    SchemeParams,
    cat_amplitude,
    decomposition_coeffs,
    fidelity_closed_form,
    mixed_output_model,
    optimal_beta,
    p_m,
    p_m_distribution,
    phi_pm_state,
    qubit_ancilla_coeffs,
    squeezing_for_amplitude,
    validity_ratio,
)
from src.fock_core import FockVector, coherent, photon_subtracted
from src.utils.errors import DomainError, SingularTargetError

GRID = [(r, T) for r in (0.1, 0.3, 0.6) for T in (0.9, 0.95, 0.999)]


def test_scheme_params_validation():
    """测试参数范围检查"""
    with pytest.raises(DomainError):
        SchemeParams(-0.1, 0.9)
    with pytest.raises(DomainError):
        SchemeParams(0.3, 0.0)
    with pytest.raises(DomainError):
        SchemeParams(0.3, 0.9, c_plus=0, c_minus=0)
    params = SchemeParams(0.3, 0.95)
    assert params.mu == pytest.approx(math.tanh(0.3) * 0.95)
    assert params.with_beta(0.1).beta == 0.1 + 0j


@pytest.mark.parametrize("T, expected", [(0.999, 0.9766), (0.95, 0.9482)])
def test_cat_amplitude(T, expected):
    """测试 r=0.3 时的猫态振幅"""
    assert cat_amplitude(SchemeParams(0.3, T)) == pytest.approx(expected, abs=1e-4)


def test_squeezing_for_amplitude_inverts():
    """测试振幅反解压缩参数"""
    r = squeezing_for_amplitude(1.2, 0.9)
    assert cat_amplitude(SchemeParams(r, 0.9)) == pytest.approx(1.2, abs=1e-12)
    assert squeezing_for_amplitude(0.0, 0.9) == 0.0
    with pytest.raises(DomainError):
        squeezing_for_amplitude(5.0, 0.2)


@pytest.mark.parametrize("r, T", GRID)
def test_decomposition_is_normalized(r, T):
    """测试 c₁² + c₂² = 1"""
    coeffs = decomposition_coeffs(SchemeParams(r, T))
    assert coeffs.c1 ** 2 + coeffs.c2 ** 2 == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("r, T", GRID)
@pytest.mark.parametrize("m", [0, 1, 2, 3])
def test_p_m_matches_fock_projection(r, T, m):
    """测试光子数概率闭式与暴力投影一致"""
    params = SchemeParams(r, T)
    if m == 0:
        expected = photon_subtracted(r, T, 0, 48)[1]
    else:
        expected = photon_subtracted(r, T, m, 48, floor=0.0)[1]
    assert p_m(params, m) == pytest.approx(expected, abs=1e-9)


def test_p_m_distribution_sums_to_one():
    """测试光子数分布归一"""
    dist = p_m_distribution(SchemeParams(0.3, 0.95), 30)
    assert dist.sum() == pytest.approx(1.0, abs=1e-12)
    assert p_m(SchemeParams(0.3, 1.0), 2) == 0.0
    with pytest.raises(DomainError):
        p_m(SchemeParams(0.3, 0.95), -1)


@pytest.mark.parametrize("r, T", GRID)
def test_phi_plus_is_decomposition(r, T):
    """测试 |φ±⟩ = c₂|Ψ₂⟩ ± c₁|Ψ₁⟩"""
    params = SchemeParams(r, T)
    coeffs = decomposition_coeffs(params)
    psi1, _ = photon_subtracted(r, T, 1, 48, floor=0.0)
    psi2, _ = photon_subtracted(r, T, 2, 48, floor=0.0)
    for sign in (1, -1):
        built = FockVector(coeffs.c2 * psi2.amps + sign * coeffs.c1 * psi1.amps)
        assert phi_pm_state(params, sign, 48).fidelity(built) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("r, T", GRID)
def test_fidelity_closed_form_matches_overlap(r, T):
    """测试保真度闭式与 |⟨α|φ₊⟩|² 一致"""
    params = SchemeParams(r, T)
    alpha = cat_amplitude(params)
    overlap = phi_pm_state(params, 1, 48).fidelity(coherent(alpha, 48))
    assert fidelity_closed_form(params) == pytest.approx(overlap, abs=1e-8)


def test_fidelity_closed_form_values():
    """测试保真度闭式的特殊值"""
    assert fidelity_closed_form(0.0) == pytest.approx(1.0)
    assert fidelity_closed_form(SchemeParams(0.3, 0.999)) == pytest.approx(0.9937, abs=5e-4)
    with pytest.raises(DomainError):
        fidelity_closed_form(1.0)


def test_optimal_beta():
    """测试最优位移的方向与大小"""
    params = SchemeParams(0.3, 0.95)
    scale = math.sqrt(3 * params.lam * 0.05 / (2 * (1 - params.mu ** 2)))
    beta, ratio = optimal_beta(params)
    assert beta == pytest.approx(scale)
    assert ratio == pytest.approx(validity_ratio(params))
    assert ratio == pytest.approx(abs(beta) ** 2)
    beta_i, _ = optimal_beta(params.with_target(1, 1j))
    assert beta_i == pytest.approx(-1j * scale)
    beta_even, ratio_even = optimal_beta(params.with_target(1, 1))
    assert beta_even == 0 and ratio_even == 0


def test_singular_target():
    """测试 c₊ + c₋ ≈ 0 时报错"""
    with pytest.raises(SingularTargetError):
        optimal_beta(SchemeParams(0.3, 0.95, c_plus=1, c_minus=-1))


def test_qubit_ancilla_coeffs():
    """测试辅助比特系数的归一化与特殊目标"""
    params = SchemeParams(0.3, 0.95)
    even = qubit_ancilla_coeffs(1, 1, params)
    assert abs(even.b1) == pytest.approx(0.0, abs=1e-15)
    assert abs(even.b0) == pytest.approx(1.0)
    plus = qubit_ancilla_coeffs(1, 0, params, (2, 0))
    minus = qubit_ancilla_coeffs(1, 0, params, (0, 2))
    assert abs(plus.b0) ** 2 + abs(plus.b1) ** 2 == pytest.approx(1.0, abs=1e-12)
    assert plus.b1 == pytest.approx(-minus.b1)
    with pytest.raises(DomainError):
        qubit_ancilla_coeffs(1, 0, params, (1, 1))
    with pytest.raises(DomainError):
        AncillaQubit(1.0, 1.0)


def test_mixed_output_model_limits():
    """测试大位移极限模型：β→0 给出 |Ψ₂⟩，β 很大时退化为 |Ψ₁⟩"""
    params = SchemeParams(0.3, 0.95)
    psi1, _ = photon_subtracted(0.3, 0.95, 1, 32)
    psi2, _ = photon_subtracted(0.3, 0.95, 2, 32)
    assert mixed_output_model(params, 32, 0.0).expectation(psi2).real == pytest.approx(1.0, abs=1e-12)
    rho = mixed_output_model(params, 32, 6.0)
    assert rho.expectation(psi1).real == pytest.approx(1.0, abs=1e-12)
    assert rho.trace().real == pytest.approx(1.0, abs=1e-12)
    assert np.isclose(rho.purity(), 1.0)
