import json
from types import SimpleNamespace

import numpy as np
import pytest
import yaml

from src.channel import erasure_channel, identity_channel
from src.cli import run
from src.dataprocessor import StateFileProcessor
from src.landauer import w_state
from src.qmat import DensityOperator, maximally_entangled


@pytest.fixture
def files(tmp_path):
    processor = StateFileProcessor()
    paths = {
        'mixed': str(tmp_path / 'mixed.yaml'),
        'bell': str(tmp_path / 'bell.yaml'),
        'w': str(tmp_path / 'w.yaml'),
        'id': str(tmp_path / 'id.yaml'),
        'erase': str(tmp_path / 'erase.yaml'),
        'dump': str(tmp_path / 'dump.yaml'),
        'root': tmp_path,
    }
    processor.save_density(paths['mixed'], DensityOperator(np.eye(2) / 2))
    processor.save_density(paths['bell'], maximally_entangled(2).density())
    processor.save_pure(paths['w'], w_state())
    processor.save_channel(paths['id'], identity_channel(2))
    processor.save_channel(paths['erase'], erasure_channel(2))
    return paths


def _json(capsys, argv):
    assert run(['--json'] + argv) == 0
    return json.loads(capsys.readouterr().out)


def test_majorize_text(capsys):
    assert run(['majorize', '[1, 0]', '[0.5, 0.5]']) == 0
    out = capsys.readouterr().out
    assert 'majorizes: true' in out
    assert 'absorbed_randomness_bits: 1.000000' in out


def test_majorize_lambda(capsys):
    record = _json(capsys, ['majorize', '[0.5, 0.5]', '[1, 0]', '--lambda', '-1.5'])
    assert record['majorizes'] is False
    assert record['lambda_majorizes'] is True
    assert np.asarray(record['transfer_matrix']).shape == (2, 2)
    record = _json(capsys, ['majorize', '[0.5, 0.5]', '[1, 0]', '--lambda', '-0.5'])
    assert record['lambda_majorizes'] is False


def test_entropy(files, capsys):
    assert abs(_json(capsys, ['entropy', files['mixed']])['value_bits'] - 1) < 1e-12
    assert abs(_json(capsys, ['entropy', files['bell'], '--measure', 'h0', '--cond', '1'])['value_bits'] + 1) < 1e-9
    assert abs(_json(capsys, ['entropy', files['bell'], '--measure', 'vn', '--cond', '1'])['value_bits'] + 1) < 1e-9
    record = _json(capsys, ['entropy', '[0.5, 0.3, 0.2]', '--measure', 'hmin', '--eps', '0.1'])
    assert abs(record['value_bits'] + np.log2(0.4)) < 1e-9


def test_entropy_smoothing_rejects_conditioning(files, capsys):
    assert run(['entropy', files['bell'], '--eps', '0.1', '--cond', '1']) == 1


def test_workbound_identity(files, capsys):
    assert run(['workbound', files['mixed'], files['id']]) == 0
    assert 'lambda_opt: 0.000000' in capsys.readouterr().out


def test_workbound_erasure(files, capsys):
    record = _json(capsys, ['workbound', files['mixed'], files['erase'], '--temp', '300'])
    assert abs(record['work_min_kTln2'] - 1) < 1e-9
    assert abs(record['closed_form_alpha'] - 2) < 1e-9
    assert abs(record['work_min_joules'] - 1.380649e-23 * 300 * np.log(2)) < 1e-30


def test_workbound_then_certify(files, capsys):
    assert run(['workbound', files['mixed'], files['erase'], '--dump', files['dump']]) == 0
    capsys.readouterr()
    assert run(['certify', files['dump']]) == 0
    assert 'passed: true' in capsys.readouterr().out


def test_certify_rejects_tampered_dump(files, capsys):
    assert run(['workbound', files['mixed'], files['erase'], '--dump', files['dump']]) == 0
    with open(files['dump']) as fr:
        payload = yaml.safe_load(fr)
    payload['primal']['alpha'] = 1.0
    with open(files['dump'], 'w') as fw:
        yaml.safe_dump(payload, fw)
    capsys.readouterr()
    assert run(['certify', files['dump']]) == 1
    assert 'passed: false' in capsys.readouterr().out


def test_demo_wstate(capsys):
    assert run(['demo', 'wstate']) == 0
    assert 'H₀(S|M) = 0.584963 bits' in capsys.readouterr().out


def test_demo_fig1(capsys):
    record = _json(capsys, ['demo', 'fig1', '--n', '10'])
    assert record['n'] == 10
    assert abs(record['replacement_bound'] - (np.log2(2 ** 10 + 1) - 1)) < 1e-9
    assert run(['demo', 'fig1', '--n', '10']) == 0


def test_demo_gap(capsys):
    record = _json(capsys, ['demo', 'gap', '--n', '3'])
    assert abs(record['replacement_bound'] - (np.log2(9) - 1)) < 1e-9
    record = _json(capsys, ['demo', 'gap', '--n', '4', '--sweep'])
    assert [row['n'] for row in record['table']] == [2, 3, 4]


def test_demo_iid(capsys):
    record = _json(capsys, ['demo', 'iid', '--n', '50'])
    assert record['n'] == 50
    assert abs(record['von_neumann_bits'] - 0.8112781245) < 1e-9


def test_demo_decouple(capsys):
    record = _json(capsys, ['--seed', '7', 'demo', 'decouple'])
    assert record['seed'] == 7
    rows = {row['pair']: row for row in record['table']}
    assert abs(rows['pure -> mixed']['decoupling_bits'] + 1) < 1e-9
    assert abs(rows['mixed -> pure']['decoupling_bits'] - 1) < 1e-9


def test_unreadable_input(files, capsys):
    assert run(['entropy', str(files['root'] / 'missing.yaml')]) == 2
    assert run(['majorize', '[1, 0]', '[0.5, 0.25]', '--lambda', 'x']) == 2
    bad = files['root'] / 'bad.yaml'
    bad.write_text('dims: [2]\nentries: [[1, 0]]\n')
    assert run(['workbound', str(bad), files['id']]) == 2


def test_domain_errors(files, capsys):
    assert run(['workbound', files['mixed'], files['erase'], '--temp', '-1']) == 1
    assert run(['workbound', files['w'], files['id']]) == 1


def test_invalid_support_tolerance(files, monkeypatch, capsys):
    monkeypatch.setenv('TOL_SUPPORT', 'abc')
    assert run(['entropy', files['mixed']]) == 1
    monkeypatch.setenv('TOL_SUPPORT', '2')
    assert run(['majorize', '[1, 0]', '[0.5, 0.5]']) == 1
    monkeypatch.setenv('TOL_SUPPORT', '1e-6')
    assert run(['entropy', files['mixed']]) == 0


def test_engine_disagreement_exit_code(monkeypatch, capsys):
    monkeypatch.setattr('src.landauer.work_bound', lambda inst, **kwargs: SimpleNamespace(work_min_kTln2=0.0))
    assert run(['demo', 'wstate']) == 1
