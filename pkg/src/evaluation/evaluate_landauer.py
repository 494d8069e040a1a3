import os
import sys
import time
from typing import Dict, Optional

proj_dir = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
sys.path.extend([proj_dir])

import numpy as np
from tqdm import tqdm

from src.exceptions import SolverError
from src.landauer import random_instance, transition_bound, w_state_demo, work_bound
from src.majorize import absorbed_randomness, random_spectrum
from src.sdp import encode_landauer_primal, solve_sdp
from src.utils import get_logger, load_config

logger = get_logger(__name__)


class WStateEvaluator:
    def __init__(self, config: Optional[Dict] = None) -> None:
        r"""Erasure with memory on the W state: H₀(S|M) = log₂(3/2)."""
        config = config or {}
        self.tol = config.get('tol', 1e-9)

    def __call__(self) -> Dict:
        print('Evaluation on the W-state erasure.')
        start = time.perf_counter()
        row = w_state_demo()
        elapsed = time.perf_counter() - start
        error = abs(row['h_zero_cond_bits'] - np.log2(1.5))
        return {'h_zero_cond_bits': row['h_zero_cond_bits'], 'error': error, 'gap': row['gap'],
                'seconds': elapsed, 'passed': error <= self.tol}


class OptimalityEvaluator:
    def __init__(self, config: Optional[Dict] = None, seed: int = 1234) -> None:
        r"""Closed-form primal, closed-form dual and the interior-point optimum agree on random instances."""
        config = config or {}
        self.samples = config.get('samples', 100)
        self.dims = config.get('dims', [2, 3])
        self.tol = config.get('tol', 1e-5)
        self.residual_tol = config.get('residual_tol', 1e-7)
        self.seed = seed

    def __call__(self) -> Dict:
        print(f'Evaluation on three-way optimality ({self.samples} random instances).')
        rng = np.random.default_rng(self.seed)

        primal_dual, primal_sdp, residuals, failed = [], [], [], 0
        for _ in tqdm(range(self.samples)):
            d_x, d_r, d_xp = (int(rng.choice(self.dims)) for _ in range(3))
            inst = random_instance(d_x, d_r, rng, d_xp)
            report = work_bound(inst, sdp_check=True)
            residuals.append(max(report.residuals.values()))
            primal_dual.append(abs(report.closed_form_alpha - report.dual_value))
            if report.sdp_alpha is None:
                failed += 1
                continue
            primal_sdp.append(abs(report.closed_form_alpha - report.sdp_alpha))

        metrics = {
            'max_primal_dual': float(np.max(primal_dual)),
            'max_primal_sdp': float(np.max(primal_sdp)) if primal_sdp else float('nan'),
            'max_certificate_residual': float(np.max(residuals)),
            'solver_failures': failed,
        }
        metrics['passed'] = (failed == 0 and metrics['max_primal_dual'] <= self.tol
                             and metrics['max_primal_sdp'] <= self.tol
                             and metrics['max_certificate_residual'] <= self.residual_tol)
        return metrics


class ClassicalOracleEvaluator:
    def __init__(self, config: Optional[Dict] = None, seed: int = 1234) -> None:
        r"""Diagonal transitions with trivial reference: SDP λ_opt against the absorbed-randomness LP."""
        config = config or {}
        self.samples = config.get('samples', 50)
        self.max_dim = config.get('max_dim', 4)
        self.tol = config.get('tol', 1e-6)
        self.seed = seed

    def __call__(self) -> Dict:
        print(f'Evaluation on the classical oracle ({self.samples} diagonal instances).')
        rng = np.random.default_rng(self.seed)

        errors = []
        for _ in tqdm(range(self.samples)):
            d_x, d_xp = (int(d) for d in rng.integers(2, self.max_dim + 1, size=2))
            p, q = random_spectrum(d_x, rng), random_spectrum(d_xp, rng)
            engine = transition_bound(np.diag(p.values), np.diag(q.values))
            errors.append(abs(engine - absorbed_randomness(p, q)))

        return {'max_error': float(np.max(errors)), 'passed': float(np.max(errors)) <= self.tol}


class InfeasibilityEvaluator:
    def __init__(self, config: Optional[Dict] = None, seed: int = 1234) -> None:
        r"""Fixing α below the optimum 2^{−λ_opt} leaves the work-cost program without a feasible point."""
        config = config or {}
        self.samples = config.get('samples', 20)
        self.shift = config.get('shift', 0.05)
        self.residual_floor = config.get('residual_floor', 1e-4)
        self.seed = seed

    def __call__(self) -> Dict:
        print(f'Evaluation on the infeasibility direction ({self.samples} instances, shift {self.shift}).')
        rng = np.random.default_rng(self.seed)

        rejected, statuses = 0, []
        for _ in tqdm(range(self.samples)):
            inst = random_instance(2, 2, rng)
            lam = work_bound(inst).lambda_opt
            problem = encode_landauer_primal(inst.sigma_XR, inst.rho_XR, alpha=2.0 ** (-(lam + self.shift)))
            try:
                solution = solve_sdp(problem)
            except SolverError as err:
                statuses.append(err.status)
                rejected += 1
                continue
            statuses.append(solution.status)
            if solution.status != 'optimal' or solution.max_residual > self.residual_floor:
                rejected += 1

        return {'rejected': rejected, 'samples': self.samples,
                'statuses': ','.join(sorted(set(statuses))), 'passed': rejected == self.samples}


if __name__ == "__main__":
    configs = load_config()
    evaluation = configs['evaluation']
    seed = evaluation.get('seed', 1234)
    print(WStateEvaluator(evaluation.get('wstate'))())
    print(OptimalityEvaluator(evaluation.get('optimality'), seed)())
    print(ClassicalOracleEvaluator(evaluation.get('classical'), seed)())
    print(InfeasibilityEvaluator(evaluation.get('infeasibility'), seed)())
