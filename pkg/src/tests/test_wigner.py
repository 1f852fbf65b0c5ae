"""测试 Wigner 函数网格"""

import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "../..")))

from src.fock_core import DetectorModel, cat, coherent, squeezed_vacuum, vacuum
from src.gaussian_core import coherent_cf, onoff_povm_cf, squeezed_vacuum_cf, tensor, vacuum_cf
from src.utils.errors import DomainError, GridTooCoarseError, ShapeError
from src.wigner import (
    GridSpec,
    WignerGrid,
    cat_wigner_analytic,
    fidelity_from_states,
    wigner_from_fock,
    wigner_from_gaussian_mixture,
    wigner_negativity,
    wigner_overlap,
)

SMALL = GridSpec.square(-6.0, 6.0, 61)


def test_vacuum_peak():
    """测试真空在原点的值为 1/(2π)"""
    grid = wigner_from_fock(vacuum(4))
    assert grid.value_at(0.0, 0.0) == pytest.approx(1.0 / (2.0 * math.pi), abs=1e-12)
    assert grid.norm_estimate == pytest.approx(1.0, abs=1e-6)
    assert wigner_negativity(grid) == pytest.approx(0.0, abs=1e-15)


def test_odd_cat_negative_at_origin():
    """测试奇猫态在原点为负"""
    grid = cat_wigner_analytic(0.95, -1)
    assert grid.value_at(0.0, 0.0) < 0
    assert wigner_negativity(grid) > 0


@pytest.mark.parametrize("parity", [1, -1])
def test_analytic_cat_matches_fock(parity):
    """测试解析猫态 Wigner 函数与 Fock 计算一致"""
    analytic = cat_wigner_analytic(0.95, parity, SMALL)
    numeric = wigner_from_fock(cat(0.95, 1.0, parity, 30), SMALL)
    assert np.max(np.abs(analytic.values - numeric.values)) < 1e-8


def test_gaussian_matches_fock_for_coherent_state():
    """测试高斯混合的解析 Wigner 函数与 Fock 计算一致"""
    gamma = 0.5 + 0.3j
    gauss = wigner_from_gaussian_mixture(coherent_cf(gamma), SMALL)
    fock = wigner_from_fock(coherent(gamma, 30), SMALL)
    assert np.max(np.abs(gauss.values - fock.values)) < 1e-10


def test_squeezed_vacuum_engines_agree():
    """测试压缩真空在两个引擎下的 Wigner 函数一致"""
    gauss = wigner_from_gaussian_mixture(squeezed_vacuum_cf(0.3), SMALL)
    fock = wigner_from_fock(squeezed_vacuum(0.3, 40), SMALL)
    assert np.max(np.abs(gauss.values - fock.values)) < 1e-9


def test_overlap_gives_purity_and_orthogonality():
    """测试 4π∫W_aW_b 等于 Tr[ρ_aρ_b]"""
    even = cat_wigner_analytic(0.95, 1)
    odd = cat_wigner_analytic(0.95, -1)
    assert wigner_overlap(even, even) == pytest.approx(1.0, abs=1e-4)
    assert wigner_overlap(even, odd) == pytest.approx(0.0, abs=1e-4)
    with pytest.raises(ShapeError):
        wigner_overlap(even, cat_wigner_analytic(0.95, 1, SMALL))


def test_coarse_grid_is_rejected():
    """测试网格覆盖不足时报错"""
    with pytest.raises(GridTooCoarseError) as info:
        wigner_from_fock(vacuum(4), GridSpec.square(-1.0, 1.0, 21))
    assert info.value.norm_estimate < 0.99


def test_grid_validation():
    """测试网格参数与形状检查"""
    with pytest.raises(DomainError):
        GridSpec.square(1.0, -1.0, 11)
    with pytest.raises(DomainError):
        GridSpec.square(-1.0, 1.0, 1)
    with pytest.raises(ShapeError):
        WignerGrid(np.zeros(3), np.zeros(2), np.zeros((3, 2)))
    with pytest.raises(DomainError):
        cat_wigner_analytic(0.0, -1)


def test_gaussian_mixture_restrictions():
    """测试多模混合与 δ 项不能直接画图"""
    with pytest.raises(ShapeError):
        wigner_from_gaussian_mixture(tensor(vacuum_cf(), vacuum_cf()))
    with pytest.raises(DomainError):
        wigner_from_gaussian_mixture(onoff_povm_cf(DetectorModel()))


def test_csv_layout():
    """测试 CSV 表头与行数"""
    grid = wigner_from_fock(vacuum(3), GridSpec.square(-6.0, 6.0, 31))
    text = grid.to_csv(digits=6)
    lines = text.strip().split("\n")
    assert lines[0] == "x,p,w"
    assert len(lines) == 1 + 31 * 31
    x, p, w = lines[1].split(",")
    assert (float(x), float(p)) == (-6.0, -6.0)
    assert w == f"{grid.values[0, 0]:.6g}"


def test_fidelity_from_density():
    """测试密度矩阵与纯目标态的保真度"""
    target = coherent(0.4, 20)
    assert fidelity_from_states(vacuum(20).to_density(), target) == pytest.approx(math.exp(-0.16))
    assert fidelity_from_states(vacuum(20), target) == pytest.approx(math.exp(-0.16))
