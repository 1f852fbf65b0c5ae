"""测试特征函数引擎"""

import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "../..")))

from src.fock_core import DetectorModel
from src.gaussian_core import (
    GaussianMixture,
    GaussianTerm,
    SymplecticMap,
    apply_bs_chain,
    beamsplitter_map,
    coherent_cf,
    condition_mixture,
    conditional_output_cf,
    fidelity_with_superposition,
    marginal,
    mean_photon_numbers,
    off_povm_cf,
    onoff_povm_cf,
    outcome_probabilities,
    povm_cf,
    squeezed_vacuum_cf,
    superposition_cf,
    symplectic_eigenvalues,
    tensor,
    trace_pairing,
    vacuum_cf,
)
from src.utils.errors import DomainError, IllConditionedIntegralError, ShapeError


def _three_mode_input(r, T):
    return apply_bs_chain(tensor(squeezed_vacuum_cf(r), vacuum_cf(), vacuum_cf()), T)


def test_term_validation():
    """测试协方差对称性与形状检查"""
    with pytest.raises(DomainError):
        GaussianTerm(1.0, np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ShapeError):
        GaussianTerm(1.0, np.zeros(3), np.eye(3))
    with pytest.raises(ShapeError):
        GaussianMixture((GaussianTerm(1.0, np.zeros(2), np.eye(2)),), 2)


def test_term_json():
    """测试高斯项的 JSON 表示保留复均值"""
    term = coherent_cf(0.3 + 0.4j).terms[0]
    restored = GaussianTerm.from_json(term.to_json())
    assert np.allclose(restored.mean, term.mean)
    assert restored.weight == pytest.approx(term.weight)


def test_squeezed_vacuum_is_pure_gaussian():
    """测试压缩真空的辛本征值为 1"""
    term = squeezed_vacuum_cf(0.4).terms[0]
    assert np.allclose(symplectic_eigenvalues(term.cov), [1.0])
    assert term.is_physical()
    assert mean_photon_numbers(squeezed_vacuum_cf(0.4))[0] == pytest.approx(math.sinh(0.4) ** 2)


def test_symplectic_maps():
    """测试分束器辛矩阵与组合"""
    bs = beamsplitter_map(0.3, (0, 1), 2)
    assert bs.is_symplectic()
    assert np.allclose(bs.compose(beamsplitter_map(0.3, (0, 1), 2).compose(SymplecticMap.identity(2))).matrix,
                       bs.matrix @ bs.matrix)
    assert bs.direct_sum(SymplecticMap.identity(1)).modes == 3
    with pytest.raises(DomainError):
        SymplecticMap(np.diag([2.0, 2.0]))
    with pytest.raises(DomainError):
        beamsplitter_map(1.5)


def test_beamsplitter_moves_coherent_amplitude():
    """测试 |α, 0⟩ → |√Tα, −√(1−T)α⟩"""
    alpha, T = 0.6 + 0.2j, 0.8
    out = beamsplitter_map(T, (0, 1), 2).apply(tensor(coherent_cf(alpha), vacuum_cf()))
    mean = out.terms[0].mean
    expected_a = math.sqrt(T) * alpha
    expected_b = -math.sqrt(1 - T) * alpha
    assert np.allclose(mean, [2 * expected_a.real, 2 * expected_a.imag, 2 * expected_b.real, 2 * expected_b.imag])


def test_marginal_of_tensor():
    """测试张量积的边缘化还原各因子"""
    joint = tensor(squeezed_vacuum_cf(0.2), coherent_cf(0.5))
    assert np.allclose(marginal(joint, [0]).terms[0].cov, squeezed_vacuum_cf(0.2).terms[0].cov)
    assert np.allclose(marginal(joint, [1]).terms[0].mean, [1.0, 0.0])


@pytest.mark.parametrize("eta, nu, beta, gamma", [
    (1.0, 0.0, 0j, 0.5),
    (0.3, 0.2, 0.25 - 0.1j, 0.5 + 0.2j),
    (0.1, 1e-7, 0.4j, -0.3),
])
def test_off_povm_on_coherent_state(eta, nu, beta, gamma):
    """测试 ⟨γ|Π_off|γ⟩ = e^{−ν}e^{−η|γ+β|²}"""
    det = DetectorModel(eta, nu, beta)
    value = trace_pairing(coherent_cf(gamma), off_povm_cf(det))
    expected = math.exp(-nu) * math.exp(-eta * abs(gamma + beta) ** 2)
    assert value.real == pytest.approx(expected, abs=1e-12)
    assert abs(value.imag) < 1e-12
    on = trace_pairing(coherent_cf(gamma), onoff_povm_cf(det))
    assert on.real == pytest.approx(1.0 - expected, abs=1e-12)


def test_superposition_fidelity_with_vacuum():
    """测试真空与相干态、猫态的保真度解析值"""
    assert fidelity_with_superposition(vacuum_cf(), 0.5, 1.0, 0.0) == pytest.approx(math.exp(-0.25))
    assert fidelity_with_superposition(vacuum_cf(), 0.5, 1.0, -1.0) == pytest.approx(0.0, abs=1e-12)
    assert trace_pairing(superposition_cf(0.9, 1.0, 1j), superposition_cf(0.9, 1.0, 1j)).real == \
        pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("r, T, eta, nu, beta", [
    (0.3, 0.95, 1.0, 0.0, 0.1),
    (0.3, 0.95, 0.1, 1e-7, 0.2 + 0.3j),
    (0.6, 0.5, 0.5, 0.01, -0.4),
])
def test_outcome_probabilities_close(r, T, eta, nu, beta):
    """测试四种探测结果的概率之和为 1"""
    state = _three_mode_input(r, T)
    probs = outcome_probabilities(state, DetectorModel(eta, nu), DetectorModel(eta, nu, beta))
    assert sum(probs.values()) == pytest.approx(1.0, abs=1e-9)
    assert all(p >= -1e-12 for p in probs.values())


def test_always_on_detector():
    """测试总是响应的探测器：off 概率为零，条件输出即边缘态"""
    state = _three_mode_input(0.3, 0.9)
    det = DetectorModel.always_on()
    assert len(povm_cf(det, "off")) == 0
    probs = outcome_probabilities(state, det, det)
    assert probs[("on", "on")] == pytest.approx(1.0)
    out, p = conditional_output_cf(state, det, det)
    assert p == pytest.approx(1.0)
    assert np.allclose(out.terms[0].cov, marginal(state, [0]).terms[0].cov)


def test_conditional_output_is_normalized():
    """测试同时响应的条件输出迹为 1"""
    out, p = conditional_output_cf(_three_mode_input(0.3, 0.95), DetectorModel(), DetectorModel(1.0, 0.0, 0.2))
    assert out.modes == 1
    assert out.trace().real == pytest.approx(1.0, abs=1e-12)
    assert 0.0 < p < 0.01


def test_ill_conditioned_integral():
    """测试二次型不正定时报错"""
    bad = GaussianMixture((GaussianTerm(1.0, np.zeros(4), -10.0 * np.eye(4)),), 2)
    with pytest.raises(IllConditionedIntegralError):
        condition_mixture(bad, [1], [off_povm_cf(DetectorModel())])


def test_delta_terms_are_not_evaluable():
    """测试 δ 项没有有限的迹"""
    with pytest.raises(DomainError):
        onoff_povm_cf(DetectorModel()).trace()
    with pytest.raises(ShapeError):
        apply_bs_chain(vacuum_cf(2), 0.9)
