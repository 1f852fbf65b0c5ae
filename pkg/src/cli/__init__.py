"""
命令行子命令的实现

每个 cmd_* 函数接收解析好的 ExperimentConfig，写出结果文件并返回结果摘要；
退出码的映射由 run_command 统一处理。
"""

import logging
import math
from dataclasses import asdict
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from src.analytics import (
    SchemeParams,
    cat_amplitude,
    decomposition_coeffs,
    fidelity_closed_form,
    optimal_beta,
    p_m,
    qubit_ancilla_coeffs,
    squeezing_for_amplitude,
)
from src.config import simulation_setting
from src.fock_core import DetectorModel, cat, coherent, photon_subtracted, povm_onoff
from src.gaussian_core import apply_bs_chain, outcome_probabilities, squeezed_vacuum_cf, tensor, vacuum_cf
from src.input_layer import ExperimentConfig
from src.output_layer import MarkdownFormatter, OutputManager
from src.protocols import GenerationResult, run_daokw, run_onoff_scheme, run_pnrd_scheme
from src.protocols.amplify import HomodyneWindow, amplify_pair, plan_cascade, run_cascade
from src.utils import encode_complex
from src.utils.errors import (
    CatGenError,
    ConfigError,
    DegenerateStateError,
    DomainError,
    GridTooCoarseError,
    InfeasibleCascadeError,
    NumericFailure,
    OutputError,
    ShapeError,
    SingularTargetError,
    TruncationError,
)
from src.wigner import GridSpec, cat_wigner_analytic, wigner_from_fock, wigner_from_gaussian_mixture

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_REGRESSION = 4

FIG2_POINTS = 50
FIG2_ALPHA_MAX = 1.6
FIG2_T = 0.99
FIG2_DIM = 64

# 面板: (r, T, η, ν, (c₊, c₋), 期望保真度, 容差)
FIG3_PANELS: Dict[str, Tuple[float, float, float, float, Tuple[complex, complex], float, float]] = {
    "a": (0.3, 0.999, 1.0, 0.0, (1.0, 1j), 0.993, 0.002),
    "b": (0.3, 0.95, 0.1, 1e-7, (1.0, 1j), 0.952, 0.005),
    "c": (0.3, 0.95, 0.1, 1e-7, (3.0, -1.0), 0.978, 0.005),
    "d": (0.3, 0.95, 0.1, 1e-7, (1.0, 0.0), 0.994, 0.005),
}

ORACLE_GRID = [(r, T) for r in (0.1, 0.3, 0.6) for T in (0.9, 0.95, 0.999)]
ORACLE_DIM = 48


def _writer(config: ExperimentConfig) -> OutputManager:
    return OutputManager(config.output_dir)


def _write(path: Optional[str], what: str) -> str:
    if path is None:
        raise OutputError(f"写入 {what} 失败")
    return path


def _engines(engine: str) -> List[str]:
    return ["fock", "gaussian"] if engine == "both" else [engine]


def _panel_setup(panel: str) -> Tuple[SchemeParams, DetectorModel, DetectorModel]:
    r, T, eta, nu, (c_plus, c_minus), _, _ = FIG3_PANELS[panel]
    params = SchemeParams(r, T, 0j, c_plus, c_minus)
    beta, _ = optimal_beta(params)
    params = params.with_beta(beta)
    return params, DetectorModel(eta, nu), DetectorModel(eta, nu, beta)


def fig2_rows(points: int = FIG2_POINTS, T: float = FIG2_T, dim: int = FIG2_DIM) -> List[List[float]]:
    """
    α ∈ (0, 1.6] 上的三条保真度曲线

    每行为 [α, |⟨α|φ₊⟩|², |⟨C₋|Ψ₁⟩|², |⟨C₊|Ψ₂⟩|², 闭式 |⟨α|φ₊⟩|²]，
    |φ₊⟩ 由 Fock 基下条件制备的 |Ψ₁⟩、|Ψ₂⟩ 按分解系数合成。
    """
    rows = []
    for alpha in np.linspace(FIG2_ALPHA_MAX / points, FIG2_ALPHA_MAX, points):
        params = SchemeParams(squeezing_for_amplitude(float(alpha), T), T)
        psi1, _ = photon_subtracted(params.r, T, 1, dim, floor=0.0)
        psi2, _ = photon_subtracted(params.r, T, 2, dim, floor=0.0)
        coeffs = decomposition_coeffs(params)
        phi_plus = (psi2.padded(dim).amps * coeffs.c2 + psi1.padded(dim).amps * coeffs.c1)
        alpha = cat_amplitude(params)
        f_phi = abs(np.vdot(coherent(alpha, dim).amps, phi_plus)) ** 2
        rows.append([
            alpha,
            float(f_phi),
            psi1.fidelity(cat(alpha, 1.0, -1.0, dim)),
            psi2.fidelity(cat(alpha, 1.0, 1.0, dim)),
            fidelity_closed_form(params),
        ])
    return rows


def cmd_reproduce_fig2(config: ExperimentConfig) -> Dict[str, Any]:
    """写出 fig2.csv，并核对 Fock 基重叠与闭式结果"""
    dim = max(config.dim or FIG2_DIM, FIG2_DIM)
    rows = fig2_rows(dim=dim)
    deviation = max(abs(row[1] - row[4]) for row in rows)
    if deviation > 1e-8:
        logger.warning(f"|φ₊⟩ 保真度与闭式结果偏差 {deviation:.3e}")
    columns = ["alpha", "F_phi_plus", "F_psi1_Cminus", "F_psi2_Cplus"]
    path = _write(_writer(config).write_csv(columns, [row[:4] for row in rows], "fig2.csv"), "fig2.csv")
    return {"path": path, "points": len(rows), "closed_form_deviation": deviation, "dim": dim}


def _run_panel(panel: str, engine: str, dim: Optional[int], tap_dim: Optional[int]) -> GenerationResult:
    params, det_b, det_c = _panel_setup(panel)
    return run_onoff_scheme(params, det_b, det_c, engine=engine, dim=dim, tap_dim=tap_dim)


def _panel_wigner(result: GenerationResult, grid: GridSpec):
    if result.engine == "gaussian":
        return wigner_from_gaussian_mixture(result.mixture, grid)
    return wigner_from_fock(result.state, grid)


def cmd_reproduce_fig3(config: ExperimentConfig) -> Dict[str, Any]:
    """
    四个面板的开关探测方案输出

    写出 fig3_panel_{a,b,c,d}_wigner.csv 与 fig3_fidelities.json。
    engine 为 both 时 Wigner 网格取 Fock 引擎的结果，同时记录两个引擎的保真度之差。
    """
    writer = _writer(config)
    engines = _engines(config.engine)
    panels: Dict[str, Any] = {}
    for panel, (r, T, eta, nu, (c_plus, c_minus), expected, tol) in FIG3_PANELS.items():
        params, _, _ = _panel_setup(panel)
        results = {engine: _run_panel(panel, engine, config.dim, config.tap_dim) for engine in engines}
        primary = results[engines[0]]
        record = {
            "r": r, "T": T, "eta": eta, "nu": nu,
            "c_plus": encode_complex(c_plus), "c_minus": encode_complex(c_minus),
            "beta": encode_complex(params.beta),
            "alpha": cat_amplitude(params),
            "expected": expected,
            "tolerance": tol,
            "fidelity": primary.fidelity_vs_target,
            "success_probability": primary.success_probability,
            "engine": primary.engine,
            "warnings": primary.warnings,
        }
        for engine, result in results.items():
            record[f"fidelity_{engine}"] = result.fidelity_vs_target
        if len(results) == 2:
            record["engine_delta"] = abs(results["fock"].fidelity_vs_target
                                         - results["gaussian"].fidelity_vs_target)
        if panel == "a":
            ancilla = qubit_ancilla_coeffs(c_plus, c_minus, params)
            record["fidelity_pnrd"] = run_pnrd_scheme(params, ancilla, dim=config.dim,
                                                      tap_dim=config.tap_dim).fidelity_vs_target
        if config.write_wigner:
            grid = _panel_wigner(primary, config.grid)
            record["wigner_norm"] = grid.norm_estimate
            filename = f"fig3_panel_{panel}_wigner.csv"
            _write(writer.write_text(grid.to_csv(), filename), filename)
        panels[panel] = record
        logger.info(f"面板 {panel}: F = {record['fidelity']:.4f} (期望 {expected})",
                    extra={"panel": panel, "fidelity": record["fidelity"]})

    summary = {"panels": panels, "dim": config.dim, "tap_dim": config.tap_dim, "grid": asdict(config.grid),
               "config": config.to_flat_dict()}
    summary["path"] = _write(writer.write_json(summary, "fig3_fidelities.json"), "fig3_fidelities.json")
    return summary


def _generate_result(config: ExperimentConfig, engine: str) -> GenerationResult:
    if config.scheme == "daokw":
        return run_daokw(config.params.r, config.params.T, config.m, dim=config.dim)
    params = config.resolved_params()
    if config.scheme == "pnrd":
        ancilla = config.ancilla or qubit_ancilla_coeffs(params.c_plus, params.c_minus, params, config.outcome)
        return run_pnrd_scheme(params, ancilla, config.outcome, dim=config.dim, tap_dim=config.tap_dim)
    det_b, det_c = config.resolved_detectors()
    return run_onoff_scheme(params, det_b, det_c, engine=engine, dim=config.dim, tap_dim=config.tap_dim)


def _emit(config: ExperimentConfig, result: GenerationResult, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    writer = _writer(config)
    summary = result.to_dict()
    summary["scheme"] = config.scheme
    summary["config"] = config.to_flat_dict()
    summary.update(extra or {})
    if config.write_wigner:
        grid = _panel_wigner(result, config.grid)
        summary["wigner_norm"] = grid.norm_estimate
        filename = f"{config.scheme}_wigner.csv"
        summary["wigner_path"] = _write(writer.write_text(grid.to_csv(), filename), filename)
    filename = f"{config.scheme}_result.json"
    summary["path"] = _write(writer.write_json(summary, filename), filename)
    return summary


def cmd_generate(config: ExperimentConfig) -> Dict[str, Any]:
    """daokw、pnrd、onoff 三种制备方案"""
    if config.scheme not in ("daokw", "pnrd", "onoff"):
        raise ConfigError(f"generate 不支持方案 {config.scheme}，请使用对应子命令", key="scheme")
    engines = _engines(config.engine)
    if config.scheme != "onoff" and engines != ["fock"]:
        logger.warning(f"方案 {config.scheme} 只有 Fock 引擎实现，忽略 engine={config.engine}")
        engines = ["fock"]
    results = {engine: _generate_result(config, engine) for engine in engines}
    extra: Dict[str, Any] = {}
    if config.scheme != "daokw":
        extra["resolved_params"] = config.resolved_params().to_dict()
    if len(results) == 2:
        extra["fidelity_gaussian"] = results["gaussian"].fidelity_vs_target
        extra["engine_delta"] = abs(results["fock"].fidelity_vs_target - results["gaussian"].fidelity_vs_target)
    return _emit(config, results[engines[0]], extra)


def cmd_amplify(config: ExperimentConfig) -> Dict[str, Any]:
    """两个振幅为 alpha、相位为 phases 的猫态做一级放大"""
    dim = int(simulation_setting("dim", config.dim))
    phi1, phi2 = config.phases
    left = cat(config.alpha, 1.0, np.exp(1j * phi1), dim)
    right = cat(config.alpha, 1.0, np.exp(1j * phi2), dim)
    result = amplify_pair(left, right, config.window, dim, amplitude=config.alpha, phases=config.phases)
    return _emit(config, result)


def cmd_cascade(config: ExperimentConfig) -> Dict[str, Any]:
    """
    级联放大

    未给出 target_amplitude 时取两级 (2·base_amplitude)。
    """
    target = config.target_amplitude or 2.0 * config.base_amplitude
    tree = plan_cascade(target, config.target_phase, config.base_amplitude)
    result = run_cascade(tree, config.window, config.dim, leaf_source=config.leaf_source, leaf_T=config.leaf_T)
    return _emit(config, result, {"phase_consistent": tree.is_consistent()})


def _check(name: str, value: Any, target: str, passed: bool) -> Dict[str, Any]:
    return {"name": name, "value": value, "target": target, "passed": bool(passed)}


def _guarded(name: str, target: str, body: Callable[[], Tuple[Any, bool]]) -> Dict[str, Any]:
    try:
        value, passed = body()
    except CatGenError as e:
        logger.error(f"检查 {name} 失败: {e}")
        return _check(name, f"{type(e).__name__}: {e}", target, False)
    return _check(name, value, target, passed)


def acceptance_checks(dim: Optional[int] = None, tap_dim: Optional[int] = None) -> List[Dict[str, Any]]:
    """验收检查清单，每项含 name, value, target, passed"""
    checks = []

    fock = {}
    for panel, (_, _, _, _, _, expected, tol) in FIG3_PANELS.items():
        def panel_body(panel=panel, expected=expected, tol=tol):
            fock[panel] = _run_panel(panel, "fock", dim, tap_dim)
            value = fock[panel].fidelity_vs_target
            return value, abs(value - expected) <= tol
        checks.append(_guarded(f"fig3 面板 {panel} 保真度", f"{expected}±{tol}", panel_body))

    def pnrd_body():
        params, _, _ = _panel_setup("a")
        ancilla = qubit_ancilla_coeffs(params.c_plus, params.c_minus, params)
        value = run_pnrd_scheme(params, ancilla, dim=dim, tap_dim=tap_dim).fidelity_vs_target
        return value, value >= 0.99
    checks.append(_guarded("fig3 面板 a 光子数分辨方案", "≥ 0.99", pnrd_body))

    def engine_body():
        value = abs(_run_panel("b", "gaussian", dim, tap_dim).fidelity_vs_target
                    - _run_panel("b", "fock", dim, tap_dim).fidelity_vs_target)
        return value, value < 1e-4
    checks.append(_guarded("双引擎保真度之差 (面板 b)", "< 1e-4", engine_body))

    def wigner_body():
        grid = GridSpec.square(-5.0, 5.0, 101)
        a = wigner_from_fock(_run_panel("a", "fock", dim, tap_dim).state, grid)
        b = wigner_from_gaussian_mixture(_run_panel("a", "gaussian", dim, tap_dim).mixture, grid)
        value = float(np.max(np.abs(a.values - b.values)))
        return value, value < 1e-6
    checks.append(_guarded("双引擎 Wigner 逐点之差 (面板 a)", "< 1e-6", wigner_body))

    def fig2_body():
        rows = fig2_rows()
        deviation = max(abs(row[1] - row[4]) for row in rows)
        below_one = min(row[1] for row in rows if row[0] < 1.0)
        return deviation, deviation < 1e-8 and below_one > 0.99
    checks.append(_guarded("fig2 闭式与 Fock 重叠之差", "< 1e-8 且 α<1 时 F>0.99", fig2_body))

    def oracle_body():
        worst = 0.0
        for r, T in ORACLE_GRID:
            params = SchemeParams(r, T)
            for m in range(4):
                _, brute = photon_subtracted(r, T, m, ORACLE_DIM, floor=0.0)
                worst = max(worst, abs(p_m(params, m) - brute))
        return worst, worst < 1e-9
    checks.append(_guarded("P_m 闭式与条件概率之差", "< 1e-9", oracle_body))

    def povm_body():
        off, on = povm_onoff(DetectorModel(0.1, 1e-7, 0.3 + 0.1j), 12)
        value = float(np.max(np.abs(off.entries + on.entries - np.eye(12))))
        return value, value < 1e-12
    checks.append(_guarded("Π_off + Π_on = I", "< 1e-12", povm_body))

    def closure_body():
        params, det_b, det_c = _panel_setup("b")
        state = apply_bs_chain(tensor(squeezed_vacuum_cf(params.r), vacuum_cf(), vacuum_cf()), params.T)
        value = abs(sum(outcome_probabilities(state, det_b, det_c).values()) - 1.0)
        return value, value < 1e-9
    checks.append(_guarded("四种探测结果概率之和", "|Σp − 1| < 1e-9", closure_body))

    def beta_body():
        params, det_b, det_c = _panel_setup("b")
        base = run_onoff_scheme(params, det_b, det_c, dim=dim, tap_dim=tap_dim).fidelity_vs_target
        gain = max(run_onoff_scheme(params.with_beta(params.beta * f), det_b,
                                    det_c.with_displacement(params.beta * f), dim=dim,
                                    tap_dim=tap_dim).fidelity_vs_target - base for f in (0.8, 1.2))
        return gain, gain <= 0.002
    checks.append(_guarded("β 偏离 ±20% 的保真度增益", "≤ 0.002", beta_body))

    def singular_body():
        try:
            optimal_beta(SchemeParams(0.3, 0.95, 0j, 1.0, -1.0))
        except SingularTargetError:
            return "SingularTargetError", True
        return "无异常", False
    checks.append(_guarded("c₊ + c₋ = 0 时报错", "SingularTargetError", singular_body))

    def amplify_body():
        left = cat(0.95, 1.0, 1.0, dim or 32)
        right = cat(0.95, 1.0, -1.0, dim or 32)
        value = amplify_pair(left, right, HomodyneWindow(0.0, 0.05), amplitude=0.95,
                             phases=(0.0, math.pi)).fidelity_vs_target
        return value, value > 0.999
    checks.append(_guarded("C₊(0.95)⊗C₋(0.95) 放大保真度", "> 0.999", amplify_body))

    def cascade_body():
        tree = plan_cascade(2.0 * math.sqrt(2.0) * 0.7, math.pi, 0.7)
        return len(tree.leaves()), tree.is_consistent() and len(tree.leaves()) == 8
    checks.append(_guarded("三级级联相位一致", "8 个叶节点，相位自洽", cascade_body))

    def odd_cat_body():
        value = wigner_from_fock(cat(0.95, 1.0, -1.0, 32)).value_at(0.0, 0.0)
        return value, value < 0.0
    checks.append(_guarded("奇猫态 W(0,0)", "< 0", odd_cat_body))

    def norm_body():
        value = cat_wigner_analytic(0.95, 1).norm_estimate
        return value, abs(value - 1.0) <= 1e-3
    checks.append(_guarded("Wigner 归一化", "1 ± 1e-3", norm_body))

    return checks


def cmd_check(config: ExperimentConfig) -> Dict[str, Any]:
    """运行验收检查，写出 check_report.json"""
    checks = acceptance_checks(config.dim, config.tap_dim)
    report = {"checks": checks, "passed": all(c["passed"] for c in checks)}
    report["path"] = _write(_writer(config).write_json(report, "check_report.json"), "check_report.json")
    report["markdown"] = MarkdownFormatter.format_check_report(checks)
    return report


COMMANDS: Dict[str, Callable[[ExperimentConfig], Dict[str, Any]]] = {
    "reproduce-fig2": cmd_reproduce_fig2,
    "reproduce-fig3": cmd_reproduce_fig3,
    "generate": cmd_generate,
    "amplify": cmd_amplify,
    "cascade": cmd_cascade,
    "check": cmd_check,
}


def exit_code_for(error: Exception) -> int:
    """参数类错误为 2，数值失败 (含截断与网格过粗) 为 3，写文件失败为 1"""
    if isinstance(error, (ConfigError, DomainError, SingularTargetError, InfeasibleCascadeError,
                          ShapeError, DegenerateStateError)):
        return EXIT_CONFIG
    if isinstance(error, (NumericFailure, TruncationError, GridTooCoarseError)):
        return EXIT_NUMERIC
    return EXIT_IO


def run_command(name: str, config: ExperimentConfig) -> Tuple[int, Optional[Dict[str, Any]]]:
    """
    执行子命令

    Returns:
        (退出码, 结果摘要)，失败时摘要为 None
    """
    try:
        summary = COMMANDS[name](config)
    except CatGenError as e:
        logger.error(f"{name} 失败: {e}", extra={"error_type": type(e).__name__})
        return exit_code_for(e), None
    if name == "check" and not summary["passed"]:
        return EXIT_REGRESSION, summary
    return EXIT_OK, summary
