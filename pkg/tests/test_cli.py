"""
Command-line surface: subcommands, output files and exit codes.
"""

import json
import logging
from pathlib import Path

import pandas as pd
import pytest

import kafuse
from kafuse import cli
from kafuse.core.config import OuterConfig, SolverConfig
from kafuse.core import solver as solver_module
from kafuse.utils.file_handler import MANIFEST_FILENAME, OutputHandler, load_manifest

SYNTH_ARGS = ['--n', '24', '--classes', '3', '--views', '2', '--informative', '3',
              '--duplicates', '2', '--nonlinear', '2', '--noise', '2', '--seed', '3']
FAST_SOLVER = ['--k', '4', '--max-iter', '3', '--seed', '1']


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    assert cli.main(['synth', '--out', str(root), *SYNTH_ARGS]) == 0
    return root


@pytest.fixture(scope="module")
def ranking_file(dataset_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("select")
    assert cli.main(['select', '--data', str(dataset_dir), '--out', str(out), *FAST_SOLVER]) == 0
    return out / 'ranking.csv'


@pytest.fixture(autouse=True)
def clear_threads(monkeypatch):
    monkeypatch.delenv(cli.THREADS_ENV, raising=False)


class TestBasics:

    def test_no_arguments_prints_help(self, capsys):
        assert cli.main([]) == 0
        assert 'select' in capsys.readouterr().out

    def test_version(self, capsys):
        assert cli.main(['version']) == 0
        assert f'KAFUSE v{kafuse.__version__}' in capsys.readouterr().out
        assert kafuse.get_version() == kafuse.__version__

    def test_log_file_receives_solver_messages(self, dataset_dir, tmp_path):
        log_file = tmp_path / 'logs' / 'run.log'
        assert cli.main(['select', '--data', str(dataset_dir), '--out', str(tmp_path / 'out'),
                         '--log-file', str(log_file), *FAST_SOLVER]) == 0
        package_logger = logging.getLogger('kafuse')
        for handler in package_logger.handlers:
            handler.flush()
        assert package_logger.level == logging.INFO
        assert 'INFO' in log_file.read_text(encoding='utf-8')

    def test_init_sdk_configures_package_logger(self, tmp_path):
        log_file = tmp_path / 'sdk.log'
        package_logger = kafuse.init_sdk(log_level='DEBUG', log_file=str(log_file))
        assert package_logger.name == 'kafuse'
        assert package_logger.level == logging.DEBUG
        logging.getLogger('kafuse.core.solver').debug('marker line')
        for handler in package_logger.handlers:
            handler.flush()
        assert 'marker line' in log_file.read_text(encoding='utf-8')
        kafuse.init_sdk()

    def test_missing_data_is_usage_error(self, tmp_path):
        assert cli.main(['select', '--out', str(tmp_path)]) == 2

    def test_unknown_mode_is_usage_error(self, dataset_dir, tmp_path):
        assert cli.main(['select', '--data', str(dataset_dir), '--out', str(tmp_path),
                         '--mode', 'kernel']) == 2

    def test_parse_float_list(self):
        assert cli.parse_float_list('0.1, 1,10', 'alphas') == [0.1, 1.0, 10.0]
        assert cli.parse_float_list(None, 'alphas') is None
        assert cli.parse_float_list('', 'alphas') == []


class TestSynth:

    def test_writes_dataset_and_truth(self, dataset_dir):
        for name in ('dataset.json', 'view1.csv', 'view2.csv', 'labels.csv',
                     'ground_truth.json', MANIFEST_FILENAME):
            assert (dataset_dir / name).exists()
        manifest = json.loads((dataset_dir / 'dataset.json').read_text(encoding='utf-8'))
        assert manifest['n'] == 24
        assert [view['d'] for view in manifest['views']] == [9, 9]

    def test_same_seed_same_files(self, dataset_dir, tmp_path):
        assert cli.main(['synth', '--out', str(tmp_path), *SYNTH_ARGS]) == 0
        for name in ('view1.csv', 'view2.csv', 'labels.csv'):
            assert (tmp_path / name).read_bytes() == (dataset_dir / name).read_bytes()

    def test_zero_informative_rejected(self, tmp_path):
        assert cli.main(['synth', '--out', str(tmp_path), '--informative', '0']) == 2


class TestSelect:

    def test_outputs(self, ranking_file):
        out = ranking_file.parent
        ranking = pd.read_csv(ranking_file)
        assert list(ranking.columns) == ['rank', 'view', 'feature', 'score']
        assert len(ranking) == 18
        assert ranking['rank'].tolist() == list(range(1, 19))
        assert ranking['score'].is_monotonic_decreasing

        trace = pd.read_csv(out / 'trace.csv')
        assert 1 <= len(trace) <= 3
        assert trace['objective'].notna().all()

        manifest = load_manifest(out / MANIFEST_FILENAME)
        assert manifest.command == 'select'
        assert manifest.config['seed'] == 1
        assert len(manifest.dataset_checksum) == 64
        assert 'ranking.csv' in manifest.outputs
        assert manifest.finished_at is not None

        replayed = SolverConfig.from_dict(manifest.config)
        assert replayed.k == 4 and replayed.seed == 1
        assert replayed.outer == OuterConfig(max_iter=3)

    def test_repeatable(self, dataset_dir, ranking_file, tmp_path):
        assert cli.main(['select', '--data', str(dataset_dir), '--out', str(tmp_path),
                         *FAST_SOLVER]) == 0
        assert (tmp_path / 'ranking.csv').read_bytes() == ranking_file.read_bytes()

    def test_graph_only_has_no_alignment(self, dataset_dir, tmp_path):
        assert cli.main(['select', '--data', str(dataset_dir), '--out', str(tmp_path),
                         '--mode', 'graph_only', *FAST_SOLVER]) == 0
        trace = pd.read_csv(tmp_path / 'trace.csv')
        assert (trace['alignment'] == 0.0).all()

    def test_cluster_count_above_view_dimension(self, dataset_dir, tmp_path):
        assert cli.main(['select', '--data', str(dataset_dir), '--out', str(tmp_path),
                         '--c', '10', *FAST_SOLVER]) == 2

    def test_missing_dataset_directory(self, tmp_path):
        assert cli.main(['select', '--data', str(tmp_path / 'absent'),
                         '--out', str(tmp_path)]) == 2

    def test_numerical_failure_exit_code(self, dataset_dir, tmp_path, monkeypatch):
        monkeypatch.setattr(solver_module, 'fusion_residual', lambda *args: float('nan'))
        assert cli.main(['select', '--data', str(dataset_dir), '--out', str(tmp_path),
                         *FAST_SOLVER]) == 3

    def test_thread_override(self, dataset_dir, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.THREADS_ENV, '1')
        assert cli.main(['select', '--data', str(dataset_dir), '--out', str(tmp_path),
                         *FAST_SOLVER]) == 0

    def test_invalid_thread_override(self, dataset_dir, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.THREADS_ENV, 'many')
        assert cli.main(['select', '--data', str(dataset_dir), '--out', str(tmp_path),
                         *FAST_SOLVER]) == 2


class TestEval:

    def test_report(self, dataset_dir, ranking_file, tmp_path):
        assert cli.main(['eval', '--data', str(dataset_dir), '--ranking', str(ranking_file),
                         '--ratio', '0.3', '--runs', '3', '--out', str(tmp_path)]) == 0
        report = pd.read_csv(tmp_path / 'report.csv', dtype={'acc_mean': str})
        assert len(report) == 1
        assert report.loc[0, 'features'] == 5
        assert report.loc[0, 'runs'] == 3
        acc = report.loc[0, 'acc_mean']
        assert len(acc.split('.')[1]) == 2
        assert 0.0 <= float(acc) <= 100.0
        assert (tmp_path / MANIFEST_FILENAME).exists()

    @pytest.mark.parametrize("ratio", ['0', '1.5'])
    def test_invalid_ratio(self, dataset_dir, ranking_file, tmp_path, ratio):
        assert cli.main(['eval', '--data', str(dataset_dir), '--ranking', str(ranking_file),
                         '--ratio', ratio, '--runs', '1', '--out', str(tmp_path)]) == 2

    def test_missing_ranking(self, dataset_dir, tmp_path):
        assert cli.main(['eval', '--data', str(dataset_dir),
                         '--ranking', str(tmp_path / 'absent.csv'), '--out', str(tmp_path)]) == 2

    def test_ranking_without_columns(self, dataset_dir, tmp_path):
        bad = tmp_path / 'bad.csv'
        bad.write_text("view,feature\n0,0\n", encoding='utf-8')
        assert cli.main(['eval', '--data', str(dataset_dir), '--ranking', str(bad),
                         '--out', str(tmp_path)]) == 2


class TestSweep:

    def test_parameter_grid(self, dataset_dir, tmp_path):
        assert cli.main(['sweep', '--data', str(dataset_dir), '--out', str(tmp_path),
                         '--alphas', '0.1,1', '--betas', '1,10', '--runs', '2',
                         *FAST_SOLVER]) == 0
        sweep = pd.read_csv(tmp_path / 'sweep.csv')
        assert len(sweep) == 4
        assert list(sweep.columns) == ['alpha', 'beta', 'r', 'ratio', 'features', 'runs',
                                       'acc_mean', 'acc_std', 'nmi_mean', 'nmi_std']
        assert sorted(zip(sweep['alpha'], sweep['beta'])) == [(0.1, 1.0), (0.1, 10.0),
                                                              (1.0, 1.0), (1.0, 10.0)]
        assert (sweep['ratio'] == 0.3).all()
        assert (tmp_path / MANIFEST_FILENAME).exists()

    def test_ratio_grid(self, dataset_dir, tmp_path):
        assert cli.main(['sweep', '--data', str(dataset_dir), '--out', str(tmp_path),
                         '--ratios', '0.1,0.5', '--runs', '1', *FAST_SOLVER]) == 0
        sweep = pd.read_csv(tmp_path / 'sweep.csv')
        assert sweep['features'].tolist() == [2, 9]

    def test_single_point_matches_select_then_eval(self, dataset_dir, ranking_file, tmp_path):
        assert cli.main(['eval', '--data', str(dataset_dir), '--ranking', str(ranking_file),
                         '--ratio', '0.3', '--runs', '2', '--seed', '1',
                         '--out', str(tmp_path / 'eval')]) == 0
        assert cli.main(['sweep', '--data', str(dataset_dir), '--out', str(tmp_path / 'sweep'),
                         '--ratios', '0.3', '--runs', '2', *FAST_SOLVER]) == 0
        report = pd.read_csv(tmp_path / 'eval' / 'report.csv')
        sweep = pd.read_csv(tmp_path / 'sweep' / 'sweep.csv')
        assert len(sweep) == 1
        for column in ('features', 'acc_mean', 'acc_std', 'nmi_mean', 'nmi_std'):
            assert sweep.loc[0, column] == report.loc[0, column]

    def test_requires_a_grid(self, dataset_dir, tmp_path):
        assert cli.main(['sweep', '--data', str(dataset_dir), '--out', str(tmp_path)]) == 2

    def test_empty_grid(self, dataset_dir, tmp_path):
        assert cli.main(['sweep', '--data', str(dataset_dir), '--out', str(tmp_path),
                         '--alphas', '']) == 2

    def test_invalid_ratio_in_grid(self, dataset_dir, tmp_path):
        assert cli.main(['sweep', '--data', str(dataset_dir), '--out', str(tmp_path),
                         '--ratios', '0.2,0']) == 2

    def test_failed_points_still_write_table(self, dataset_dir, tmp_path, monkeypatch):
        monkeypatch.setattr(solver_module, 'fusion_residual', lambda *args: float('nan'))
        assert cli.main(['sweep', '--data', str(dataset_dir), '--out', str(tmp_path),
                         '--alphas', '0.1,1', '--runs', '1', *FAST_SOLVER]) == 3
        assert (tmp_path / 'sweep.csv').exists()
        assert len(pd.read_csv(tmp_path / 'sweep.csv')) == 0


class TestOutputHandler:

    def test_lists_written_files(self, tmp_path):
        handler = OutputHandler(str(tmp_path / 'out'))
        handler.write_csv(pd.DataFrame({'a': [1.0]}), 'one.csv')
        handler.write_json({'b': 2}, 'two.json')
        assert [Path(name).name for name in handler.list_output_files()] == ['one.csv', 'two.json']
        assert set(handler.written) == {'one.csv', 'two.json'}

    def test_csv_keeps_full_precision(self, tmp_path):
        handler = OutputHandler(str(tmp_path))
        target = handler.write_csv(pd.DataFrame({'score': [0.123456789012345]}), 'scores.csv')
        assert target.read_text(encoding='utf-8') == 'score\n0.123456789012345\n'
        with pytest.raises(TypeError):
            handler.write_csv(pd.DataFrame({'a': [1.0]}), 'x.csv', float_format='%.2f')

    def test_validate_file_extension(self, tmp_path):
        handler = OutputHandler(str(tmp_path))
        text = tmp_path / 'ranking.txt'
        text.write_text("rank\n1\n", encoding='utf-8')
        is_valid, message = handler.validate_file(str(text), 'csv')
        assert not is_valid and '.txt' in message
