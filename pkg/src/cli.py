r"""Command-line front end.

    python -m src.cli entropy STATE --measure h0|hmin|hmax|vn [--cond B] [--eps EPS]
    python -m src.cli majorize SPEC_A SPEC_B [--lambda LAM]
    python -m src.cli workbound SIGMA CHANNEL [--sdp-check] [--temp K] [--dump PATH]
    python -m src.cli certify SDP_DUMP
    python -m src.cli demo wstate|fig1|iid|decouple [--n N] [--eps EPS]
    (`demo gap` is an alias of `demo fig1`, the single-shot gap of the heralded mixture)

Exit status: 0 on success, 1 on a domain error (or a rejected certificate), 2 on unreadable input.
"""
import argparse
import json
import sys
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from scipy.constants import k as BOLTZMANN

from src.dataprocessor import StateFileProcessor
from src.entropy import (
    EntropyValue,
    SmoothingParams,
    h_max,
    h_max_cond,
    h_min,
    h_min_cond,
    h_smooth_classical,
    h_smooth_iid_classical,
    h_von_neumann,
    h_zero,
    h_zero_cond,
)
from src.exceptions import FileFormatError, LandauerError, PreconditionError
from src.landauer import (
    build_instance,
    gap_table,
    iid_rate,
    single_shot_gap_demo,
    special_decoupling,
    w_state_demo,
    work_bound,
)
from src.majorize import (
    absorbed_randomness,
    lambda_feasible,
    majorizes,
    named_closed_form,
    uniform,
    weakly_submajorizes,
)
from src.qmat import PureStateVector, random_density, spectrum
from src.sdp import encode_landauer_primal, verify_certificate
from src.utils import get_logger, load_config

logger = get_logger(__name__)

UNCONDITIONAL = {'h0': h_zero, 'hmin': h_min, 'hmax': h_max, 'vn': h_von_neumann}
CONDITIONAL = {'h0': h_zero_cond, 'hmin': h_min_cond, 'hmax': h_max_cond}
SMOOTHED = {'h0': 'zero', 'hmin': 'min'}

GAP_DEFAULT_N = 10
IID_DEFAULT_N = 200
IID_SPECTRUM = (0.75, 0.25)


# ------------------------------------------------------------------------------------------ #
# output
# ------------------------------------------------------------------------------------------ #

def _jsonable(value):
    if isinstance(value, np.ndarray):
        # only real arrays (transfer matrices) reach the report
        return np.asarray(value, dtype=float).tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"not serializable: {type(value).__name__}")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if value is None:
        return 'none'
    if isinstance(value, (float, np.floating)):
        return f"{float(value) + 0.0:.6f}"
    if isinstance(value, (list, tuple)):
        return '[' + ', '.join(_fmt(v) for v in value) + ']'
    return str(value)


def emit(record: Dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(record, default=_jsonable, indent=2))
        return
    for key, value in record.items():
        if isinstance(value, dict):
            print(f"{key}:")
            for sub_key, sub_value in value.items():
                print(f"  {sub_key}: {_fmt(sub_value)}")
        elif isinstance(value, pd.DataFrame):
            print(f"{key}:")
            print(value.to_string(float_format=lambda v: f"{v + 0.0:.6f}"))
        else:
            print(f"{key}: {_fmt(value)}")


def _table(rows: List[Dict], as_json: bool):
    frame = pd.DataFrame(rows)
    return frame.to_dict(orient='records') if as_json else frame


# ------------------------------------------------------------------------------------------ #
# subcommands
# ------------------------------------------------------------------------------------------ #

def cmd_entropy(args, processor: StateFileProcessor) -> int:
    state = processor.load_state(args.state)
    rho = state.density() if isinstance(state, PureStateVector) else state
    if args.eps > 0:
        if args.cond is not None:
            raise PreconditionError("smoothing is only available for unconditional entropies")
        if args.measure not in SMOOTHED:
            raise PreconditionError(f"smoothing is only available for {sorted(SMOOTHED)}")
        value = h_smooth_classical(spectrum(rho), SmoothingParams(args.eps), SMOOTHED[args.measure])
    elif args.cond is None:
        value = UNCONDITIONAL[args.measure](rho)
    elif args.measure == 'vn':
        if not 0 <= args.cond < len(rho.dims):
            raise PreconditionError(f"no subsystem {args.cond} in dims {rho.dims}")
        bits = h_von_neumann(rho).bits - h_von_neumann(rho.ptrace([args.cond])).bits
        value = EntropyValue(bits, 'vn_cond')
    else:
        value = CONDITIONAL[args.measure](rho, cond_on=args.cond)
    record = value.to_record()
    if args.cond is not None:
        record['conditioned_on'] = args.cond
    emit(record, args.json)
    return 0


def cmd_majorize(args, processor: StateFileProcessor) -> int:
    p = processor.load_spectrum(args.spec_a, normalized=False)
    q = processor.load_spectrum(args.spec_b, normalized=False)
    record = {'majorizes': majorizes(p, q), 'weakly_submajorizes': weakly_submajorizes(p, q)}
    if p.is_normalized() and q.is_normalized():
        record['absorbed_randomness_bits'] = absorbed_randomness(p, q)
        closed = named_closed_form(p, q)
        if closed is not None:
            record['closed_form_bits'] = closed
    if args.lam is not None:
        feasible, witness = lambda_feasible(p, q, args.lam)
        record['lambda'] = args.lam
        record['lambda_majorizes'] = feasible
        if witness is not None and args.json:
            record['transfer_matrix'] = witness.entries
    emit(record, args.json)
    return 0


def cmd_workbound(args, processor: StateFileProcessor) -> int:
    sigma = processor.load_state(args.sigma)
    if isinstance(sigma, PureStateVector) and len(sigma.dims) < 2:
        sigma = sigma.density()
    chan = processor.load_channel(args.channel)
    inst = build_instance(sigma, chan)
    report = work_bound(inst, sdp_check=args.sdp_check)
    record = report.to_record()
    if args.temp is not None:
        if args.temp <= 0:
            raise PreconditionError(f"temperature must be positive, got {args.temp}")
        record['temperature_K'] = args.temp
        record['work_min_joules'] = report.joules(args.temp, BOLTZMANN)
    if args.dump:
        problem = report.sdp_problem or encode_landauer_primal(inst.sigma_XR, inst.rho_XR)
        processor.dump_sdp(args.dump, inst.landauer_data, (report.closed_form_alpha, report.optimal_channel.choi),
                           report.certificate, problem, report.sdp_solution)
        logger.info(f"sdp_dump written to {args.dump}")
    emit(record, args.json)
    return 0


def cmd_certify(args, processor: StateFileProcessor) -> int:
    data, primal, dual, meta = processor.load_sdp_dump(args.dump)
    tol = float(processor_config(args)['tolerances']['certificate'])
    report = verify_certificate(data, primal, dual, tol=tol)
    record = {'passed': report.passed, 'primal_value': report.primal_value, 'dual_value': report.dual_value,
              'gap': report.gap, 'max_residual': report.max_residual, 'residuals': report.residuals,
              'solver_status': meta.get('status')}
    emit(record, args.json)
    return 0 if report.passed else 1


def _demo_wstate(args) -> int:
    row = w_state_demo()
    if args.json:
        emit(row, True)
        return 0
    print(f"H₀(S|M) = {row['h_zero_cond_bits'] + 0.0:.6f} bits")
    emit({key: value for key, value in row.items() if key != 'h_zero_cond_bits'}, False)
    return 0


def _demo_gap(args) -> int:
    n = GAP_DEFAULT_N if args.n is None else args.n
    record = single_shot_gap_demo(n, args.eps)
    if args.sweep:
        table = gap_table(range(2, n + 1), args.eps).reset_index()
        record = {'epsilon': args.eps, 'table': table.to_dict(orient='records') if args.json else table}
    emit(record, args.json)
    return 0


def _demo_iid(args) -> int:
    n = IID_DEFAULT_N if args.n is None else args.n
    p = np.asarray(IID_SPECTRUM)
    smoothed = h_smooth_iid_classical(p, n, SmoothingParams(args.eps))
    record = {'n': n, 'epsilon': args.eps, 'h_zero_smooth_bits': smoothed.bits,
              'rate_per_copy': smoothed.bits / n, 'von_neumann_bits': h_von_neumann(p).bits}
    emit(record, args.json)
    return 0


def _demo_decouple(args) -> int:
    rng = np.random.default_rng(args.seed)
    pure = np.diag([1.0, 0.0])
    mixed = uniform(2).as_density().matrix
    pairs = [('pure -> mixed', pure, mixed), ('mixed -> pure', mixed, pure),
             ('random', random_density(3, rng).matrix, random_density(3, rng).matrix)]
    rows = []
    for name, sigma, rho in pairs:
        rows.append({'pair': name,
                     'decoupling_bits': special_decoupling(sigma, rho).bits,
                     'iid_rate_bits': iid_rate(sigma, rho).bits})
    emit({'seed': args.seed, 'table': _table(rows, args.json)}, args.json)
    return 0


DEMOS = {'wstate': _demo_wstate, 'fig1': _demo_gap, 'gap': _demo_gap, 'iid': _demo_iid,
         'decouple': _demo_decouple}


def cmd_demo(args, processor: StateFileProcessor) -> int:
    return DEMOS[args.name](args)


COMMANDS = {'entropy': cmd_entropy, 'majorize': cmd_majorize, 'workbound': cmd_workbound,
            'certify': cmd_certify, 'demo': cmd_demo}


# ------------------------------------------------------------------------------------------ #

def processor_config(args) -> Dict:
    return load_config(args.config)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='python -m src.cli',
                                     description='Minimal work cost of quantum processes.')
    parser.add_argument('--json', action='store_true', help='machine-readable output at full precision')
    parser.add_argument('--seed', type=int, default=None, help='seed for random-instance demos')
    parser.add_argument('--config', default=None, help='configuration YAML (defaults to config/landauer_base.yaml)')
    sub = parser.add_subparsers(dest='command', required=True)

    entropy = sub.add_parser('entropy', help='entropy of a state or spectrum file')
    entropy.add_argument('state')
    entropy.add_argument('--measure', choices=sorted(UNCONDITIONAL), default='h0')
    entropy.add_argument('--cond', type=int, default=None, help='index of the conditioning subsystem')
    entropy.add_argument('--eps', type=float, default=0.0, help='classical trace-distance smoothing radius')

    majorize = sub.add_parser('majorize', help='compare two spectra (files or inline lists)')
    majorize.add_argument('spec_a')
    majorize.add_argument('spec_b')
    majorize.add_argument('--lambda', dest='lam', type=float, default=None)

    workbound = sub.add_parser('workbound', help='minimal work cost of applying a channel to a state')
    workbound.add_argument('sigma')
    workbound.add_argument('channel')
    workbound.add_argument('--sdp-check', action='store_true')
    workbound.add_argument('--temp', type=float, default=None, help='temperature in kelvin for a joule figure')
    workbound.add_argument('--dump', default=None, help='write an sdp_dump for `certify`')

    certify = sub.add_parser('certify', help='verify the primal/dual pair stored in an sdp_dump')
    certify.add_argument('dump')

    demo = sub.add_parser('demo', help='worked examples')
    demo.add_argument('name', choices=sorted(DEMOS))
    demo.add_argument('--n', type=int, default=None)
    demo.add_argument('--eps', type=float, default=0.05)
    demo.add_argument('--sweep', action='store_true', help='fig1 demo: tabulate n = 2..N')
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)
    try:
        config = processor_config(args)
        if args.seed is None:
            args.seed = int(config.get('evaluation', {}).get('seed', 0))
        processor = StateFileProcessor(config)
        return COMMANDS[args.command](args, processor)
    except FileFormatError as err:
        logger.error(str(err))
        return 2
    except LandauerError as err:
        logger.error(f"{type(err).__name__}: {err}")
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == '__main__':
    main()
