"""测试零差放大与级联规划"""

import math
import os
import sys

import numpy as np
import pytest
from scipy.special import ndtr

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "../..")))

from src.fock_core import cat, vacuum
from src.protocols.amplify import (
    CascadeNode,
    HomodyneWindow,
    amplify_pair,
    best_matching_amplitude,
    plan_cascade,
    run_cascade,
    window_povm,
)
from src.utils.errors import DomainError, InfeasibleCascadeError


def test_window_validation():
    """测试窗口参数检查"""
    with pytest.raises(DomainError):
        HomodyneWindow(0.0, 0.0)
    with pytest.raises(DomainError):
        HomodyneWindow(0.0, 0.05, 0.0)
    assert HomodyneWindow(efficiency=0.75).smear == pytest.approx(math.sqrt(1 / 3))
    assert HomodyneWindow.from_config().epsilon == pytest.approx(0.05)


def test_window_povm_bounds():
    """测试窗口 POVM 半正定且宽窗口趋于恒等"""
    narrow = window_povm(HomodyneWindow(0.3, 0.05), 12)
    assert narrow.is_positive()
    assert np.max(np.linalg.eigvalsh(narrow.entries)) < 1.0
    wide = window_povm(HomodyneWindow(0.0, 12.0), 8, nodes=200)
    assert np.allclose(wide.entries, np.eye(8), atol=1e-6)


def test_vacuum_acceptance_probability():
    """测试真空输入的接受概率等于 x 分布在窗口内的积分"""
    window = HomodyneWindow(0.0, 0.05)
    result = amplify_pair(vacuum(16), vacuum(16), window, dim=16)
    expected = ndtr(0.05) - ndtr(-0.05)
    assert result.success_probability == pytest.approx(expected, rel=1e-8)
    assert result.fidelity_vs_target == pytest.approx(1.0, abs=1e-5)


def test_amplify_even_odd_pair():
    """测试 C₊(α) ⊗ C₋(α) 放大为 C₋(√2α)"""
    alpha = 0.95
    window = HomodyneWindow(0.0, 0.05)
    result = amplify_pair(cat(alpha, 1, 1, 32), cat(alpha, 1, -1, 32), window, dim=32,
                          amplitude=alpha, phases=(0.0, math.pi))
    assert result.details["output_phase"] == pytest.approx(math.pi)
    assert result.details["output_amplitude"] == pytest.approx(math.sqrt(2) * alpha)
    assert result.fidelity_vs_target > 0.999
    assert result.warnings == []


def test_amplify_phase_mismatch_warns():
    """测试相位和不为 π 时给出警告"""
    state = cat(0.8, 1, 1, 24)
    result = amplify_pair(state, state, HomodyneWindow(), dim=24, amplitude=0.8, phases=(0.0, 0.0))
    assert len(result.warnings) == 1


def test_best_matching_amplitude():
    """测试在固定相位下找回猫态振幅"""
    amplitude, fidelity = best_matching_amplitude(cat(1.2, 1, -1, 32), math.pi)
    assert amplitude == pytest.approx(1.2, abs=1e-4)
    assert fidelity == pytest.approx(1.0, abs=1e-8)


def test_plan_cascade_depth_three():
    """测试振幅比 2√2 的级联：8 个叶节点，根相位 π"""
    tree = plan_cascade(2 * math.sqrt(2) * 0.7, math.pi, 0.7)
    assert tree.depth == 3
    assert len(tree.leaves()) == 8
    assert all(leaf.amplitude == pytest.approx(0.7) for leaf in tree.leaves())
    assert tree.is_consistent()
    assert tree.recomputed_phase() == pytest.approx(math.pi)
    assert tree.to_dict()["phase"] == pytest.approx(math.pi)


def test_plan_cascade_children_phases():
    """测试子节点相位 (π ± φ)/2"""
    tree = plan_cascade(1.4, 0.6, 1.4 / math.sqrt(2))
    left, right = tree.children
    assert left.phase == pytest.approx((math.pi + 0.6) / 2)
    assert right.phase == pytest.approx((math.pi - 0.6) / 2)


@pytest.mark.parametrize("target, base", [(1.5, 1.0), (1.0, 1.0), (0.5, 1.0), (1.0, 0.0)])
def test_plan_cascade_infeasible(target, base):
    """测试振幅比不是 √2 的正整数次幂时报错"""
    with pytest.raises(InfeasibleCascadeError):
        plan_cascade(target, math.pi, base)


def test_inconsistent_tree():
    """测试手工构造的不一致树"""
    tree = CascadeNode(math.pi, 1.0, (CascadeNode(0.0, 0.7), CascadeNode(0.0, 0.7)))
    assert not tree.is_consistent()


def test_run_cascade_single_stage():
    """测试一级级联与直接放大一致"""
    base = 0.95
    tree = plan_cascade(math.sqrt(2) * base, math.pi, base)
    result = run_cascade(tree, HomodyneWindow(0.0, 0.05), dim=32)
    assert result.fidelity_vs_target > 0.999
    assert len(result.stages) == 1
    assert result.stages[0]["count"] == 1
    assert result.details["depth"] == 1


def test_run_cascade_two_stages_counts_repeats():
    """测试两级级联中重复子树的出现次数"""
    tree = plan_cascade(1.4, math.pi, 0.7)
    result = run_cascade(tree, HomodyneWindow(0.0, 0.05), dim=32)
    assert sum(stage["count"] for stage in result.stages) == 3
    first_level = [s for s in result.stages if s["depth"] == 1]
    expected = result.stages[-1]["success_probability"]
    for stage in first_level:
        expected *= stage["success_probability"] ** stage["count"]
    assert result.success_probability == pytest.approx(expected, rel=1e-12)


def test_run_cascade_errors():
    """测试叶节点树与未知来源"""
    window = HomodyneWindow()
    with pytest.raises(InfeasibleCascadeError):
        run_cascade(CascadeNode(0.0, 1.0), window, dim=16)
    with pytest.raises(DomainError):
        run_cascade(plan_cascade(1.0, math.pi, 1 / math.sqrt(2)), window, dim=16, leaf_source="laser")


def test_squeezed_photon_leaf_falls_back_for_even_phase():
    """测试偶相位叶节点没有 S(r)|1⟩ 近似时退回理想猫态"""
    tree = plan_cascade(math.sqrt(2) * 0.8, math.pi, 0.8)
    result = run_cascade(tree, HomodyneWindow(), dim=32, leaf_source="squeezed_photon")
    assert any("S(r)|1⟩" in w for w in result.warnings)
    assert result.fidelity_vs_target > 0.95


def test_squeezed_photon_leaf_at_default_truncation():
    """测试默认截断维度下 S(r)|1⟩ 叶节点的压缩参数拟合不会越过截断"""
    base = 0.95
    tree = plan_cascade(math.sqrt(2) * base, math.pi, base)
    result = run_cascade(tree, HomodyneWindow(), dim=32, leaf_source="squeezed_photon")
    assert result.details["leaf_source"] == "squeezed_photon"
    assert result.fidelity_vs_target > 0.99


def test_run_cascade_keeps_distinct_subtrees_apart():
    """测试相位、振幅与深度相同但叶节点不同的子树分别计算"""
    amp = 0.7
    plain = CascadeNode(0.0, amp * math.sqrt(2), (CascadeNode(math.pi / 2, amp), CascadeNode(math.pi / 2, amp)))
    skewed = CascadeNode(0.0, amp * math.sqrt(2), (CascadeNode(math.pi / 2, amp), CascadeNode(math.pi / 2, 0.5)))
    tree = CascadeNode(math.pi, 2 * amp, (plain, skewed))
    result = run_cascade(tree, HomodyneWindow(0.0, 0.05), dim=32)
    first_level = [s for s in result.stages if s["depth"] == 1]
    assert len(first_level) == 2
    assert all(s["count"] == 1 for s in first_level)
    assert first_level[0]["fidelity"] != pytest.approx(first_level[1]["fidelity"], abs=1e-6)


def test_amplify_fidelity_improves_as_window_narrows():
    """测试窗口半宽 0.4 → 0.05 时放大保真度单调不减"""
    alpha = 0.95
    left, right = cat(alpha, 1, 1, 32), cat(alpha, 1, -1, 32)
    fidelities = [
        amplify_pair(left, right, HomodyneWindow(0.0, eps), dim=32, amplitude=alpha,
                     phases=(0.0, math.pi)).fidelity_vs_target
        for eps in (0.4, 0.2, 0.1, 0.05)
    ]
    assert all(b >= a - 1e-12 for a, b in zip(fidelities, fidelities[1:]))
    assert fidelities[-1] > 0.999


@pytest.mark.slow
def test_two_stage_cascade_fixture():
    """测试两级级联 (叶振幅 0.7、ε=0.1) 把振幅翻倍的保真度与总成功概率"""
    tree = plan_cascade(1.4, math.pi, 0.7)
    result = run_cascade(tree, HomodyneWindow(0.0, 0.1), dim=32)
    assert result.target.fidelity(cat(1.4, 1, -1, 32)) == pytest.approx(1.0, abs=1e-12)
    assert result.fidelity_vs_target == pytest.approx(0.998647, abs=1e-5)
    assert result.success_probability == pytest.approx(7.2197e-5, rel=1e-3)
