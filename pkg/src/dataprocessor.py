import os
from typing import Dict, Optional, Tuple, Union

import numpy as np
import yaml

from src.channel import ChoiMap
from src.exceptions import FileFormatError, LandauerError
from src.majorize import as_spectrum
from src.qmat import DensityOperator, PureStateVector, Spectrum
from src.sdp import DualCertificate, LandauerData, SdpProblem, SdpSolution
from src.utils import get_logger, load_config

logger = get_logger(__name__)


class StateFileProcessor():
    r"""Reads and writes the shared YAML file format.

    matrix:   {dims: [d1, ...], entries: [[re, im], ...]}  row-major, optional subnormalized: true
    pure:     {dims: [...], amplitudes: [[re, im], ...]}
    spectrum: {spectrum: [p1, p2, ...]}
    channel:  {dim_in, dim_out, choi: [[re, im], ...]}      input-major Choi matrix
    sdp_dump: {kind: sdp_dump, dims, sigma_XR, rho_XpR, blocks, constraints, primal, dual, iterates}
    """

    def __init__(self, config=None):
        config = config or load_config()
        tols = config['tolerances']
        self.trace_tol = tols.get('trace', 1e-9)
        self.choi_psd_tol = 1e-8

    # --------------------------------------------------------------------------------------------- #

    def read(self, source: str) -> Union[Dict, list]:
        r"""Path to a YAML document, or an inline YAML/JSON literal such as '[1, 0]'."""
        if os.path.exists(source):
            try:
                with open(source, "r") as fr:
                    payload = yaml.safe_load(fr)
            except (OSError, yaml.YAMLError) as err:
                raise FileFormatError(str(err), 'file') from err
        else:
            try:
                payload = yaml.safe_load(source)
            except yaml.YAMLError as err:
                raise FileFormatError(f"{source!r} is neither a readable file nor a literal", 'file') from err
            if not isinstance(payload, (dict, list)):
                raise FileFormatError(f"no such file: {source}", 'file')
        if payload is None:
            raise FileFormatError("empty document", 'file')
        if not isinstance(payload, (dict, list)):
            raise FileFormatError(f"expected a mapping or a list, got {type(payload).__name__}", 'file')
        return payload

    def write(self, path: str, payload: Dict) -> None:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w") as fw:
            yaml.safe_dump(payload, fw, sort_keys=False, default_flow_style=None)
        logger.debug(f"wrote {path}")

    # --------------------------------------------------------------------------------------------- #

    @staticmethod
    def _dims(payload: Dict, field: str = 'dims') -> Tuple[int, ...]:
        dims = payload.get(field)
        if not isinstance(dims, list) or not dims or not all(isinstance(d, int) and d > 0 for d in dims):
            raise FileFormatError(f"expected a non-empty list of positive integers, got {dims!r}", field)
        return tuple(dims)

    @staticmethod
    def decode_entries(entries, count: int, field: str = 'entries') -> np.ndarray:
        if not isinstance(entries, list) or len(entries) != count:
            size = len(entries) if isinstance(entries, list) else 'no'
            raise FileFormatError(f"expected {count} [re, im] pairs, got {size}", field)
        try:
            pairs = np.asarray(entries, dtype=float)
        except (TypeError, ValueError) as err:
            raise FileFormatError(f"entries must be numeric [re, im] pairs ({err})", field) from err
        if pairs.shape != (count, 2):
            raise FileFormatError(f"entries must be [re, im] pairs, got array of shape {pairs.shape}", field)
        if not np.all(np.isfinite(pairs)):
            raise FileFormatError("entries must be finite", field)
        return pairs[:, 0] + 1j * pairs[:, 1]

    @staticmethod
    def encode_entries(m: np.ndarray) -> list:
        flat = np.asarray(m, dtype=complex).ravel()
        return [[float(z.real), float(z.imag)] for z in flat]

    def decode_matrix(self, payload: Dict, field: str = 'entries') -> Tuple[np.ndarray, Tuple[int, ...]]:
        if not isinstance(payload, dict):
            raise FileFormatError(f"expected a mapping, got {type(payload).__name__}", field)
        dims = self._dims(payload)
        d = int(np.prod(dims))
        flat = self.decode_entries(payload.get('entries'), d * d, field)
        return flat.reshape(d, d), dims

    def encode_matrix(self, m: np.ndarray, dims=None) -> Dict:
        m = np.asarray(m, dtype=complex)
        return {'dims': [int(d) for d in (dims or (m.shape[0],))], 'entries': self.encode_entries(m)}

    # --------------------------------------------------------------------------------------------- #

    ### density operators ###
    def to_density(self, payload: Dict, field: str = 'entries') -> DensityOperator:
        m, dims = self.decode_matrix(payload, field)
        try:
            return DensityOperator(m, dims, trace_tol=self.trace_tol,
                                   subnormalized=bool(payload.get('subnormalized', False)))
        except LandauerError as err:
            raise FileFormatError(str(err), field) from err

    def load_density(self, source: str) -> DensityOperator:
        return self.to_density(self.read(source))

    def save_density(self, path: str, rho: DensityOperator) -> None:
        payload = self.encode_matrix(rho.matrix, rho.dims)
        if rho.subnormalized:
            payload['subnormalized'] = True
        self.write(path, payload)

    ### pure states ###
    def to_pure(self, payload: Dict) -> PureStateVector:
        dims = self._dims(payload)
        amp = self.decode_entries(payload.get('amplitudes'), int(np.prod(dims)), 'amplitudes')
        try:
            return PureStateVector(amp, dims)
        except LandauerError as err:
            raise FileFormatError(str(err), 'amplitudes') from err

    def load_state(self, source: str) -> Union[DensityOperator, PureStateVector]:
        payload = self.read(source)
        if isinstance(payload, dict) and 'amplitudes' in payload:
            return self.to_pure(payload)
        if isinstance(payload, list) or 'spectrum' in payload:
            return self.to_spectrum(payload).as_density()
        return self.to_density(payload)

    def save_pure(self, path: str, psi: PureStateVector) -> None:
        self.write(path, {'dims': list(psi.dims), 'amplitudes': self.encode_entries(psi.amplitudes)})

    ### spectra ###
    def to_spectrum(self, payload, normalized: bool = True) -> Spectrum:
        values = payload.get('spectrum') if isinstance(payload, dict) else payload
        if not isinstance(values, list) or not values:
            raise FileFormatError(f"expected a non-empty list of reals, got {values!r}", 'spectrum')
        try:
            p = as_spectrum(np.asarray(values, dtype=float))
        except (TypeError, ValueError, LandauerError) as err:
            raise FileFormatError(str(err), 'spectrum') from err
        if normalized and not p.is_normalized(self.trace_tol):
            raise FileFormatError(f"spectrum sums to {p.total}, not 1", 'spectrum')
        return p

    def load_spectrum(self, source: str, normalized: bool = True) -> Spectrum:
        return self.to_spectrum(self.read(source), normalized)

    def save_spectrum(self, path: str, p: Spectrum) -> None:
        self.write(path, {'spectrum': [float(v) for v in p.values]})

    ### channels ###
    def to_channel(self, payload: Dict) -> ChoiMap:
        if not isinstance(payload, dict):
            raise FileFormatError("expected a mapping", 'choi')
        dims = {}
        for field in ('dim_in', 'dim_out'):
            value = payload.get(field)
            if not isinstance(value, int) or value < 1:
                raise FileFormatError(f"expected a positive integer, got {value!r}", field)
            dims[field] = value
        n = dims['dim_in'] * dims['dim_out']
        choi = payload.get('choi')
        if isinstance(choi, dict):
            choi = choi.get('entries')
        j = self.decode_entries(choi, n * n, 'choi').reshape(n, n)
        if np.abs(j - j.conj().T).max() > self.choi_psd_tol:
            raise FileFormatError("Choi matrix is not Hermitian", 'choi')
        j = (j + j.conj().T) / 2
        w, v = np.linalg.eigh(j)
        if w[0] < -self.choi_psd_tol:
            raise FileFormatError(f"Choi matrix is not PSD (min eigenvalue {w[0]:.3e})", 'choi')
        j = (v * np.clip(w, 0, None)) @ v.conj().T
        return ChoiMap(j, dims['dim_in'], dims['dim_out'])

    def load_channel(self, source: str) -> ChoiMap:
        return self.to_channel(self.read(source))

    def save_channel(self, path: str, chan: ChoiMap) -> None:
        self.write(path, {'dim_in': chan.dim_in, 'dim_out': chan.dim_out,
                          'choi': self.encode_entries(chan.choi)})

    # --------------------------------------------------------------------------------------------- #

    ### sdp_dump ###
    def dump_sdp(self, path: str, data: LandauerData, primal: Tuple[float, np.ndarray],
                 dual: DualCertificate, problem: Optional[SdpProblem] = None,
                 solution: Optional[SdpSolution] = None) -> None:
        d_x, d_xp, d_r = data.dims
        alpha, t = primal
        payload = {
            'kind': 'sdp_dump',
            'dims': [d_x, d_xp, d_r],
            'sigma_XR': self.encode_matrix(data.sigma_XR, (d_x, d_r)),
            'rho_XpR': self.encode_matrix(data.rho_XpR, (d_xp, d_r)),
            'primal': {'alpha': float(alpha), 'T': self.encode_matrix(t, (d_x, d_xp))},
            'dual': {'omega': self.encode_matrix(dual.omega.matrix),
                     'x_block': self.encode_matrix(dual.x_block),
                     'z_block': self.encode_matrix(dual.z_block, (d_xp, d_r))},
        }
        if problem is not None:
            payload['blocks'] = [{'name': b.name, 'dim': b.dim} for b in problem.blocks]
            payload['constraints'] = [{'label': g.label, 'kind': g.kind, 'rows': g.stop - g.start,
                                       'out_dim': g.out_dim} for g in problem.groups]
        if solution is not None:
            payload['status'] = solution.status
            payload['iterates'] = [{key: float(value) for key, value in row.items()} for row in solution.history]
        self.write(path, payload)

    def load_sdp_dump(self, source: str) -> Tuple[LandauerData, Tuple[float, np.ndarray], DualCertificate, Dict]:
        payload = self.read(source)
        if not isinstance(payload, dict) or payload.get('kind') != 'sdp_dump':
            raise FileFormatError("not an sdp_dump document", 'kind')
        dims = payload.get('dims')
        if not isinstance(dims, list) or len(dims) != 3 or not all(isinstance(d, int) and d > 0 for d in dims):
            raise FileFormatError(f"expected [d_X, d_X', d_R], got {dims!r}", 'dims')
        d_x, d_xp, d_r = dims
        sigma, _ = self.decode_matrix(payload.get('sigma_XR'), 'sigma_XR')
        rho, _ = self.decode_matrix(payload.get('rho_XpR'), 'rho_XpR')
        if sigma.shape[0] != d_x * d_r or rho.shape[0] != d_xp * d_r:
            raise FileFormatError("state sizes disagree with dims", 'dims')
        primal = payload.get('primal') or {}
        alpha = primal.get('alpha')
        if not isinstance(alpha, (int, float)):
            raise FileFormatError(f"expected a number, got {alpha!r}", 'primal.alpha')
        t, _ = self.decode_matrix(primal.get('T'), 'primal.T')
        dual = payload.get('dual') or {}
        omega, _ = self.decode_matrix(dual.get('omega'), 'dual.omega')
        x_block, _ = self.decode_matrix(dual.get('x_block'), 'dual.x_block')
        z_block, _ = self.decode_matrix(dual.get('z_block'), 'dual.z_block')
        try:
            omega_state = DensityOperator(omega, (d_xp,), subnormalized=True)
        except LandauerError as err:
            raise FileFormatError(str(err), 'dual.omega') from err
        meta = {key: payload[key] for key in ('blocks', 'constraints', 'status', 'iterates') if key in payload}
        return (LandauerData(sigma, rho, (d_x, d_xp, d_r)), (float(alpha), t),
                DualCertificate(omega_state, x_block, z_block), meta)
