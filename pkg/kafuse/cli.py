"""
命令行接口
特征选择、评估、参数扫描与合成数据生成
"""

import argparse
import contextlib
import itertools
import logging
import os
import sys
from typing import List, Optional

import pandas as pd
from threadpoolctl import threadpool_limits

from .core.config import (
    DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_GPI_MAX_ITER, DEFAULT_GPI_TOL,
    DEFAULT_K, DEFAULT_MAX_ITER, DEFAULT_R, DEFAULT_SEED, DEFAULT_TOL,
    DEFAULT_ZETA, SUPPORTED_MODES, SUPPORTED_NORMALIZATIONS,
    GPIConfig, KernelConfig, OuterConfig, ProxConfig, SolverConfig,
    SyntheticSpec,
)
from .core.dataset import (
    dataset_checksum, load_dataset, normalize, synth_generate,
    write_dataset, write_ground_truth,
)
from .core.evaluation import (
    DEFAULT_RATIO, DEFAULT_RUNS, evaluate_selection, report_to_row,
)
from .core.solver import FeatureRanking, KafuseSolver
from .exceptions import (
    ConfigurationError, DataError, InputError, KafuseError, NumericalError,
    ResourceNotFoundError, SchemaError, SweepError,
)
from .utils.file_handler import OutputHandler, RunManifest
from . import get_version, init_sdk

logger = logging.getLogger(__name__)

THREADS_ENV = "KAFUSE_THREADS"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

PERCENT_COLUMNS = ['acc_mean', 'acc_std', 'nmi_mean', 'nmi_std']


def print_banner():
    """打印横幅"""
    banner = """
╔══════════════════════════════════════════════════════════════╗
║                         KAFUSE                               ║
║        核对齐与图融合的多视图无监督特征选择                  ║
╚══════════════════════════════════════════════════════════════╝
    """
    print(banner)


def print_help():
    """打印帮助信息"""
    print_banner()
    help_text = """
使用方式:
  kafuse [命令] [参数]

命令:
  select   - 运行特征选择，输出特征排序与收敛轨迹
  eval     - 在选中特征上做 k-means 并计算 ACC / NMI
  sweep    - 扫描特征比例与 alpha / beta / r 参数网格
  synth    - 生成带真值的合成多视图数据集
  help     - 显示帮助信息
  version  - 显示版本信息

示例:
  kafuse synth --out synth/ --seed 7
  kafuse select --data synth/ --seed 7 --out run/
  kafuse eval --data synth/ --ranking run/ranking.csv --ratio 0.3 --runs 50
  kafuse sweep --data synth/ --ratios 0.1,0.2,0.3,0.4,0.5
  kafuse sweep --data synth/ --alphas 0.001,0.01,0.1,1,10,100,1000 --betas 1

环境变量:
  KAFUSE_THREADS  覆盖 --threads，限制BLAS线程数

获取详细帮助:
  kafuse [命令] --help
    """
    print(help_text)


def print_version():
    """打印版本信息"""
    print(f"KAFUSE v{get_version()}")


def parse_float_list(text: Optional[str], name: str) -> Optional[List[float]]:
    """解析逗号分隔的数值列表；未提供时返回 None"""
    if text is None:
        return None
    items = [item.strip() for item in text.split(',') if item.strip()]
    try:
        return [float(item) for item in items]
    except ValueError as e:
        raise ConfigurationError(f"参数 --{name} 不是合法的数值列表: {text}") from e


def resolve_threads(args) -> Optional[int]:
    """KAFUSE_THREADS 优先于 --threads"""
    value = os.environ.get(THREADS_ENV)
    if value:
        try:
            threads = int(value)
        except ValueError as e:
            raise ConfigurationError(f"环境变量 {THREADS_ENV} 不是整数: {value}") from e
    else:
        threads = getattr(args, 'threads', None)
    if threads is not None and threads < 1:
        raise ConfigurationError(f"线程数必须为正: {threads}")
    return threads


def build_solver_config(args, **overrides) -> SolverConfig:
    """由命令行参数构造并验证求解器配置"""
    kernel = (KernelConfig(policy='fixed', sigma=args.sigma)
              if args.sigma is not None else KernelConfig())
    prox = (ProxConfig(policy='fixed', step=args.step)
            if args.step is not None else ProxConfig())
    values = dict(
        alpha=args.alpha,
        beta=args.beta,
        r=args.r,
        zeta=args.zeta,
        k=args.k,
        c=args.c,
        kernel=kernel,
        gpi=GPIConfig(tol=args.gpi_tol, max_iter=args.gpi_iters),
        prox=prox,
        outer=OuterConfig(tol=args.tol, max_iter=args.max_iter),
        seed=args.seed,
        mode=args.mode,
    )
    values.update(overrides)
    cfg = SolverConfig(**values)
    is_valid, message = cfg.validate()
    if not is_valid:
        raise ConfigurationError(message)
    return cfg


def load_input(args):
    """读取并归一化数据集，返回 (数据集, 校验和)"""
    ds = load_dataset(args.data)
    return normalize(ds, args.normalize), dataset_checksum(args.data)


def new_manifest(command: str, args, **fields) -> RunManifest:
    arguments = {key: value for key, value in vars(args).items() if key != 'command'}
    return RunManifest(command=command, version=get_version(), arguments=arguments, **fields)


def handle_select_command(args):
    """处理 select 命令"""
    cfg = build_solver_config(args)
    ds, checksum = load_input(args)
    output = OutputHandler(args.out)
    manifest = new_manifest('select', args, config=cfg.to_dict(),
                            dataset=str(args.data), dataset_checksum=checksum)

    solver = KafuseSolver(cfg)
    state, trace = solver.fit(ds)
    ranking = solver.rank_features(state)

    output.write_csv(ranking.to_frame(), 'ranking.csv')
    output.write_csv(trace.to_frame(), 'trace.csv')
    output.write_manifest(manifest)

    print(f"✓ 特征选择完成: {len(ranking)} 个特征, {len(trace)} 次迭代, {trace.stop_reason}")
    print(f"  输出目录: {output.output_dir}")
    return EXIT_OK


def handle_eval_command(args):
    """处理 eval 命令"""
    output = OutputHandler(args.out)
    is_valid, message = output.validate_file(args.ranking, 'csv')
    if not is_valid:
        raise InputError(message)

    ds, checksum = load_input(args)
    ranking = FeatureRanking.from_frame(pd.read_csv(args.ranking))
    manifest = new_manifest('eval', args, dataset=str(args.data), dataset_checksum=checksum)

    report = evaluate_selection(ds, ranking, ratio=args.ratio, runs=args.runs, seed=args.seed)
    frame = format_percent(pd.DataFrame([report_to_row(report)]))
    output.write_csv(frame, 'report.csv')
    output.write_manifest(manifest)

    print(f"✓ 评估完成: ACC={report.acc_mean:.2f}±{report.acc_std:.2f}, "
          f"NMI={report.nmi_mean:.2f}±{report.nmi_std:.2f}")
    return EXIT_OK


def handle_sweep_command(args):
    """处理 sweep 命令：参数网格 × 特征比例"""
    ratios = parse_float_list(args.ratios, 'ratios')
    grids = {
        'alpha': parse_float_list(args.alphas, 'alphas'),
        'beta': parse_float_list(args.betas, 'betas'),
        'r': parse_float_list(args.rs, 'rs'),
    }
    if ratios is None and all(grid is None for grid in grids.values()):
        raise ConfigurationError("sweep 需要 --ratios 或至少一个参数网格（--alphas/--betas/--rs）")
    for name, grid in [('ratios', ratios), *grids.items()]:
        if grid is not None and not grid:
            raise ConfigurationError(f"参数网格 {name} 为空")

    ratios = ratios or [DEFAULT_RATIO]
    for ratio in ratios:
        if not 0 < ratio <= 1:
            raise ConfigurationError(f"特征比例必须在 (0, 1] 内: {ratio}")
    alphas = grids['alpha'] or [args.alpha]
    betas = grids['beta'] or [args.beta]
    rs = grids['r'] or [args.r]

    base = build_solver_config(args)
    points = [build_solver_config(args, alpha=a, beta=b, r=r)
              for a, b, r in itertools.product(alphas, betas, rs)]

    ds, checksum = load_input(args)
    output = OutputHandler(args.out)
    manifest = new_manifest('sweep', args, config=base.to_dict(),
                            dataset=str(args.data), dataset_checksum=checksum)

    logger.info(f"参数扫描: {len(points)} 个参数点 × {len(ratios)} 个比例")
    rows = []
    failed = []
    for index, cfg in enumerate(points, 1):
        point = {'alpha': cfg.alpha, 'beta': cfg.beta, 'r': cfg.r}
        try:
            solver = KafuseSolver(cfg)
            state, _ = solver.fit(ds)
        except NumericalError as e:
            logger.error(f"参数点 {point} 失败: {e}")
            failed.append(point)
            continue
        ranking = solver.rank_features(state)
        for ratio in ratios:
            report = evaluate_selection(ds, ranking, ratio=ratio, runs=args.runs, seed=args.seed)
            rows.append(report_to_row(report, extra=point))
        logger.info(f"参数点 {index}/{len(points)} 完成: {point}")

    columns = ['alpha', 'beta', 'r', 'ratio', 'features', 'runs', *PERCENT_COLUMNS]
    output.write_csv(format_percent(pd.DataFrame(rows, columns=columns)), 'sweep.csv')
    output.write_manifest(manifest)

    if failed:
        raise SweepError(f"{len(failed)} 个参数点数值失败", failed_points=failed)
    print(f"✓ 参数扫描完成: {len(rows)} 行")
    return EXIT_OK


def handle_synth_command(args):
    """处理 synth 命令"""
    spec = SyntheticSpec(
        n=args.n,
        classes=args.classes,
        views=args.views,
        informative=args.informative,
        duplicates=args.duplicates,
        nonlinear=args.nonlinear,
        noise=args.noise,
        noise_std=args.noise_std,
        separation=args.separation,
        seed=args.seed,
    )
    is_valid, message = spec.validate()
    if not is_valid:
        raise ConfigurationError(message)

    ds = synth_generate(spec)
    write_dataset(ds, args.out)
    write_ground_truth(ds.truth, args.out)

    output = OutputHandler(args.out)
    manifest = new_manifest('synth', args, config=spec.to_dict(), dataset=str(args.out),
                            dataset_checksum=dataset_checksum(args.out))
    output.written.update({
        name: str(output.path(name))
        for name in ['dataset.json', 'labels.csv', 'ground_truth.json',
                     *[f"view{v + 1}.csv" for v in range(ds.V)]]
    })
    output.write_manifest(manifest)

    print(f"✓ 合成数据集已生成: {args.out} (n={ds.n}, V={ds.V}, d_v={spec.view_dim})")
    return EXIT_OK


def format_percent(frame: pd.DataFrame) -> pd.DataFrame:
    """百分数列格式化为两位小数"""
    frame = frame.copy()
    for column in PERCENT_COLUMNS:
        if column in frame:
            frame[column] = frame[column].map(lambda value: f"{value:.2f}")
    return frame


def add_solver_arguments(parser):
    """select / sweep 共用的求解器参数"""
    parser.add_argument('--alpha', type=float, default=DEFAULT_ALPHA,
                        help=f'标签平滑项权重（默认: {DEFAULT_ALPHA}）')
    parser.add_argument('--beta', type=float, default=DEFAULT_BETA,
                        help=f'视图图平滑项权重（默认: {DEFAULT_BETA}）')
    parser.add_argument('--r', type=float, default=DEFAULT_R,
                        help=f'核对齐视图权重指数，需大于1（默认: {DEFAULT_R}）')
    parser.add_argument('--zeta', type=float, default=DEFAULT_ZETA,
                        help=f'lambda 的 l1 权重（默认: {DEFAULT_ZETA}）')
    parser.add_argument('--k', type=int, default=DEFAULT_K,
                        help=f'近邻数（默认: {DEFAULT_K}）')
    parser.add_argument('--c', type=int, default=None,
                        help='聚类数（默认: 数据集类别数）')
    parser.add_argument('--mode', choices=SUPPORTED_MODES, default='full',
                        help='目标函数模式（默认: full）')
    parser.add_argument('--max-iter', type=int, default=DEFAULT_MAX_ITER,
                        help=f'最大外层迭代次数（默认: {DEFAULT_MAX_ITER}）')
    parser.add_argument('--tol', type=float, default=DEFAULT_TOL,
                        help=f'相对目标变化收敛阈值（默认: {DEFAULT_TOL}）')
    parser.add_argument('--sigma', type=float, default=None,
                        help='固定核带宽（默认: 中位数启发式）')
    parser.add_argument('--step', type=float, default=None,
                        help='固定近端步长（默认: 回溯）')
    parser.add_argument('--gpi-tol', type=float, default=DEFAULT_GPI_TOL,
                        help=f'GPI内层容差（默认: {DEFAULT_GPI_TOL}）')
    parser.add_argument('--gpi-iters', type=int, default=DEFAULT_GPI_MAX_ITER,
                        help=f'GPI内层最大迭代次数（默认: {DEFAULT_GPI_MAX_ITER}）')


def create_parser():
    """创建参数解析器"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--verbose', '-v', action='store_true', help='详细输出模式')
    common.add_argument('--log-file', default=None, help='日志文件路径（可选）')
    common.add_argument('--threads', type=int, default=None,
                        help=f'BLAS线程数（环境变量 {THREADS_ENV} 优先）')

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument('--data', required=True, help='数据集目录（包含 dataset.json）')
    data.add_argument('--normalize', choices=SUPPORTED_NORMALIZATIONS, default='minmax',
                      help='逐特征归一化（默认: minmax）')
    data.add_argument('--seed', type=int, default=DEFAULT_SEED,
                      help=f'随机种子（默认: {DEFAULT_SEED}）')

    parser = argparse.ArgumentParser(
        description='KAFUSE - 多视图无监督特征选择',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        add_help=False,
    )
    subparsers = parser.add_subparsers(dest='command', help='可用命令')

    subparsers.add_parser('help', help='显示帮助信息')
    subparsers.add_parser('version', help='显示版本信息')

    select_parser = subparsers.add_parser('select', parents=[common, data],
                                          help='运行特征选择')
    add_solver_arguments(select_parser)
    select_parser.add_argument('--out', default='./kafuse-output',
                               help='输出目录（默认: ./kafuse-output）')

    eval_parser = subparsers.add_parser('eval', parents=[common, data],
                                        help='评估特征排序')
    eval_parser.add_argument('--ranking', required=True, help='ranking.csv 路径')
    eval_parser.add_argument('--ratio', type=float, default=DEFAULT_RATIO,
                             help=f'特征选择比例（默认: {DEFAULT_RATIO}）')
    eval_parser.add_argument('--runs', type=int, default=DEFAULT_RUNS,
                             help=f'k-means 次数（默认: {DEFAULT_RUNS}）')
    eval_parser.add_argument('--out', default='./kafuse-output',
                             help='输出目录（默认: ./kafuse-output）')

    sweep_parser = subparsers.add_parser('sweep', parents=[common, data],
                                         help='参数与比例扫描')
    add_solver_arguments(sweep_parser)
    sweep_parser.add_argument('--ratios', default=None, help='特征比例列表，逗号分隔')
    sweep_parser.add_argument('--alphas', default=None, help='alpha 网格，逗号分隔')
    sweep_parser.add_argument('--betas', default=None, help='beta 网格，逗号分隔')
    sweep_parser.add_argument('--rs', default=None, help='r 网格，逗号分隔')
    sweep_parser.add_argument('--runs', type=int, default=DEFAULT_RUNS,
                              help=f'每个网格点的 k-means 次数（默认: {DEFAULT_RUNS}）')
    sweep_parser.add_argument('--out', default='./kafuse-output',
                              help='输出目录（默认: ./kafuse-output）')

    defaults = SyntheticSpec()
    synth_parser = subparsers.add_parser('synth', parents=[common], help='生成合成数据集')
    synth_parser.add_argument('--n', type=int, default=defaults.n, help='样本数')
    synth_parser.add_argument('--classes', type=int, default=defaults.classes, help='类别数')
    synth_parser.add_argument('--views', type=int, default=defaults.views, help='视图数')
    synth_parser.add_argument('--informative', type=int, default=defaults.informative,
                              help='每个视图的信息特征数')
    synth_parser.add_argument('--duplicates', type=int, default=defaults.duplicates,
                              help='每个视图的线性复制特征数')
    synth_parser.add_argument('--nonlinear', type=int, default=defaults.nonlinear,
                              help='每个视图的 tanh 冗余特征数')
    synth_parser.add_argument('--noise', type=int, default=defaults.noise,
                              help='每个视图的噪声特征数')
    synth_parser.add_argument('--noise-std', type=float, default=defaults.noise_std,
                              help='信息特征的噪声标准差')
    synth_parser.add_argument('--separation', type=float, default=defaults.separation,
                              help='类中心尺度')
    synth_parser.add_argument('--seed', type=int, default=defaults.seed, help='随机种子')
    synth_parser.add_argument('--out', required=True, help='输出数据集目录')

    return parser


HANDLERS = {
    'select': handle_select_command,
    'eval': handle_eval_command,
    'sweep': handle_sweep_command,
    'synth': handle_synth_command,
}


def run_command(args) -> int:
    """执行子命令并把异常映射为退出码"""
    handler = HANDLERS[args.command]
    try:
        threads = resolve_threads(args)
        limits = threadpool_limits(limits=threads) if threads else contextlib.nullcontext()
        with limits:
            return handler(args)
    except (NumericalError, SweepError) as e:
        logger.error(f"{args.command} 数值失败: {e}")
        return EXIT_NUMERICAL
    except (ConfigurationError, InputError, SchemaError,
            ResourceNotFoundError, DataError) as e:
        logger.error(f"{args.command} 失败: {e}")
        return EXIT_USAGE
    except KafuseError as e:
        logger.error(f"{args.command} 失败: {e}")
        return EXIT_FAILURE
    except Exception as e:
        logger.exception(f"{args.command} 意外失败: {e}")
        return EXIT_FAILURE


def main(argv: Optional[List[str]] = None) -> int:
    """主函数"""
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = create_parser()

    # 如果没有参数，显示帮助
    if not argv:
        print_help()
        return EXIT_OK

    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    if args.command == 'help':
        print_help()
        return EXIT_OK
    if args.command == 'version':
        print_version()
        return EXIT_OK
    if args.command not in HANDLERS:
        print_help()
        return EXIT_USAGE

    init_sdk(log_level="DEBUG" if args.verbose else "INFO", log_file=args.log_file)
    return run_command(args)


if __name__ == "__main__":
    sys.exit(main())
