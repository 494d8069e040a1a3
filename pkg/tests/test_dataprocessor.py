import os

import numpy as np
import pytest
import yaml

from src.channel import erasure_channel, random_channel
from src.dataprocessor import StateFileProcessor
from src.exceptions import FileFormatError
from src.landauer import build_instance, w_state, work_bound
from src.qmat import DensityOperator, PureStateVector, random_density
from src.sdp import verify_certificate


@pytest.fixture
def processor():
    return StateFileProcessor()


def _write(path, payload):
    with open(path, 'w') as fw:
        yaml.safe_dump(payload, fw)
    return str(path)


def test_density_file(processor, tmp_path, rng):
    rho = random_density(4, rng, dims=(2, 2))
    path = str(tmp_path / 'rho.yaml')
    processor.save_density(path, rho)
    loaded = processor.load_density(path)
    assert loaded.dims == (2, 2)
    assert np.abs(loaded.matrix - rho.matrix).max() < 1e-15


def test_subnormalized_density_file(processor, tmp_path):
    rho = DensityOperator(np.eye(2) / 4, subnormalized=True)
    path = str(tmp_path / 'sub.yaml')
    processor.save_density(path, rho)
    assert processor.load_density(path).subnormalized
    with open(path) as fr:
        assert yaml.safe_load(fr)['subnormalized'] is True


def test_load_state_dispatch(processor, tmp_path):
    psi = w_state()
    path = str(tmp_path / 'w.yaml')
    processor.save_pure(path, psi)
    loaded = processor.load_state(path)
    assert isinstance(loaded, PureStateVector)
    assert loaded.dims == (2, 2, 2)
    assert np.abs(loaded.amplitudes - psi.amplitudes).max() < 1e-15

    state = processor.load_state(_write(tmp_path / 'p.yaml', {'spectrum': [0.25, 0.75]}))
    assert isinstance(state, DensityOperator)
    assert np.abs(state.matrix - np.diag([0.75, 0.25])).max() < 1e-15
    assert processor.load_state('[0.5, 0.5]').dim == 2


def test_spectrum_inline_literal(processor):
    p = processor.load_spectrum('[1, 0]')
    assert np.abs(p.values - [1, 0]).max() == 0
    with pytest.raises(FileFormatError) as err:
        processor.load_spectrum('[0.5, 0.25]')
    assert err.value.field == 'spectrum'
    assert processor.load_spectrum('[0.5, 0.25]', normalized=False).total == 0.75


def test_spectrum_file(processor, tmp_path):
    path = _write(tmp_path / 'q.yaml', {'spectrum': [0.5, 0.5]})
    assert processor.load_spectrum(path).rank() == 2
    with pytest.raises(FileFormatError):
        processor.load_spectrum(_write(tmp_path / 'bad.yaml', {'spectrum': []}))
    with pytest.raises(FileFormatError):
        processor.load_spectrum(_write(tmp_path / 'neg.yaml', {'spectrum': [1.5, -0.5]}))


def test_missing_file(processor, tmp_path):
    with pytest.raises(FileFormatError) as err:
        processor.read(str(tmp_path / 'nowhere.yaml'))
    assert err.value.field == 'file'
    with pytest.raises(FileFormatError):
        processor.read(_write(tmp_path / 'empty.yaml', None))


@pytest.mark.parametrize('payload, field', [
    ({'dims': [2], 'entries': [[1, 0], [0, 0], [0, 0]]}, 'entries'),
    ({'dims': [2], 'entries': [[1, 0], [0, 0], [0, 0], ['x', 0]]}, 'entries'),
    ({'dims': [0], 'entries': []}, 'dims'),
    ({'dims': [2], 'entries': [[0.5, 0], [0.1, 0], [0, 0], [0.5, 0]]}, 'entries'),
    ({'dims': [2], 'entries': [[1, 0], [0, 0], [0, 0], [1, 0]]}, 'entries'),
])
def test_density_format_errors(processor, tmp_path, payload, field):
    with pytest.raises(FileFormatError) as err:
        processor.load_density(_write(tmp_path / 'bad.yaml', payload))
    assert err.value.field == field


def test_channel_file(processor, tmp_path, rng):
    chan = random_channel(2, 3, rng)
    path = str(tmp_path / 'chan.yaml')
    processor.save_channel(path, chan)
    loaded = processor.load_channel(path)
    assert (loaded.dim_in, loaded.dim_out) == (2, 3)
    assert np.abs(loaded.choi - chan.choi).max() < 1e-12


def test_channel_format_errors(processor, tmp_path):
    bad_psd = {'dim_in': 1, 'dim_out': 2, 'choi': [[1, 0], [0, 0], [0, 0], [-1, 0]]}
    with pytest.raises(FileFormatError) as err:
        processor.load_channel(_write(tmp_path / 'psd.yaml', bad_psd))
    assert err.value.field == 'choi'
    with pytest.raises(FileFormatError) as err:
        processor.load_channel(_write(tmp_path / 'dims.yaml', {'dim_in': 0, 'dim_out': 2, 'choi': []}))
    assert err.value.field == 'dim_in'


def test_sdp_dump(processor, tmp_path):
    inst = build_instance(DensityOperator(np.eye(2) / 2), erasure_channel(2))
    report = work_bound(inst, sdp_check=True)
    path = str(tmp_path / 'dump.yaml')
    processor.dump_sdp(path, inst.landauer_data, (report.closed_form_alpha, report.optimal_channel.choi),
                       report.certificate, report.sdp_problem, report.sdp_solution)
    assert os.path.exists(path)

    data, primal, dual, meta = processor.load_sdp_dump(path)
    assert data.dims == (2, 2, 2)
    assert abs(primal[0] - 2) < 1e-8
    assert meta['status'] == report.sdp_status
    assert {block['name'] for block in meta['blocks']} >= {'T', 'alpha'}
    assert meta['iterates']
    assert verify_certificate(data, primal, dual).passed


def test_sdp_dump_errors(processor, tmp_path):
    with pytest.raises(FileFormatError) as err:
        processor.load_sdp_dump(_write(tmp_path / 'other.yaml', {'kind': 'matrix'}))
    assert err.value.field == 'kind'
    with pytest.raises(FileFormatError) as err:
        processor.load_sdp_dump(_write(tmp_path / 'dims.yaml', {'kind': 'sdp_dump', 'dims': [2, 2]}))
    assert err.value.field == 'dims'
