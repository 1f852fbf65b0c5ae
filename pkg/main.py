"""猫态条件制备仿真主入口模块"""

import argparse
import logging
import os
import sys

# 将项目根目录添加到Python路径
root_dir = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, root_dir)

# 加载环境变量文件
try:
    from dotenv import load_dotenv
    # 优先加载项目根目录下的.env文件
    env_path = os.path.join(root_dir, '.env')
    if os.path.exists(env_path):
        load_dotenv(env_path)
except ImportError:
    print("警告: python-dotenv未安装，无法从.env文件加载环境变量")

from src.cli import COMMANDS, EXIT_CONFIG, run_command
from src.input_layer import load_experiment_config
from src.output_layer import format_result
from src.utils.errors import ConfigError
from src.utils.logging_utils import setup_logging

logger = logging.getLogger(__name__)

SUBCOMMAND_HELP = {
    "reproduce-fig2": "输出光子减除态保真度曲线 fig2.csv",
    "reproduce-fig3": "输出四个面板的 Wigner 网格与 fig3_fidelities.json",
    "generate": "按配置运行 daokw / pnrd / onoff 方案",
    "amplify": "对两个猫态做一级零差放大",
    "cascade": "按级联树执行多级放大",
    "check": "运行验收检查并输出 check_report.json",
}


def parse_args(argv=None):
    """解析命令行参数"""
    parser = argparse.ArgumentParser(description="相干态叠加条件制备仿真")

    # 添加子命令
    subparsers = parser.add_subparsers(dest="command", help="命令")

    for name in COMMANDS:
        sub = subparsers.add_parser(name, help=SUBCOMMAND_HELP[name])
        sub.add_argument("--config", type=str, help="实验配置文件 (扁平 JSON)")
        sub.add_argument("--engine", type=str, choices=["fock", "gaussian", "both"], help="计算引擎")
        sub.add_argument("--dim", type=int, help="信号模截断维度")
        sub.add_argument("--out", type=str, help="结果输出目录")

    return parser.parse_args(argv)


def main(argv=None) -> int:
    """主函数，返回进程退出码"""
    args = parse_args(argv)
    setup_logging()

    if args.command not in COMMANDS:
        # 默认显示帮助信息
        print("请指定命令，使用 --help 查看帮助")
        return EXIT_CONFIG

    overrides = {"engine": args.engine, "dim": args.dim, "output_dir": args.out}
    try:
        config = load_experiment_config(args.config, overrides)
    except ConfigError as e:
        logger.error(f"配置错误: {e}", extra={"key": e.key, "line": e.line})
        print(f"配置错误: {e}")
        return EXIT_CONFIG

    code, summary = run_command(args.command, config)
    if summary is None:
        print(f"{args.command} 失败，退出码 {code}，详见日志")
    elif args.command == "check":
        print(summary["markdown"])
    elif "success_probability" in summary:
        print(format_result(summary, "markdown"))
    else:
        print(f"结果已写入 {summary.get('path')}")
    return code


if __name__ == "__main__":
    sys.exit(main())
