import os
import sys
import time
from typing import Dict, Optional

proj_dir = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
sys.path.extend([proj_dir])

import numpy as np
from tqdm import tqdm

from src.entropy import (
    SmoothingParams,
    h_max_cond,
    h_min,
    h_smooth_iid_classical,
    h_von_neumann,
    h_zero,
    h_zero_cond,
)
from src.landauer import gap_table, single_shot_gap_demo
from src.majorize import random_spectrum
from src.qmat import random_density
from src.utils import get_logger, load_config

logger = get_logger(__name__)


class SingleShotGapEvaluator:
    def __init__(self, config: Optional[Dict] = None) -> None:
        r"""Identity vs. replacement of the heralded mixture: single-shot bounds diverge, the i.i.d. rate stays 0."""
        config = config or {}
        self.n = config.get('n', 10)
        self.epsilon = config.get('epsilon', 0.05)
        self.sweep = config.get('sweep', list(range(2, 13)))

    def __call__(self) -> Dict:
        print(f'Evaluation on the single-shot gap (n={self.n}, eps={self.epsilon}).')
        row = single_shot_gap_demo(self.n, self.epsilon)
        # small n also runs the full engine on the replacement process
        single_shot_gap_demo(2, self.epsilon, engine_check=True)
        table = gap_table(self.sweep, self.epsilon)

        expected = np.log2(2 ** self.n + 1) - 1
        bounds = table['replacement_bound'].to_numpy()
        metrics = {
            'identity_bound': row['identity_bound'],
            'replacement_bound': row['replacement_bound'],
            'replacement_error': abs(row['replacement_bound'] - expected),
            'iid_rate': row['iid_rate'],
            'h_min_smooth': row['h_min_smooth'],
            'h_zero_smooth': row['h_zero_smooth'],
            'monotone_in_n': bool(np.all(np.diff(bounds) > 0)),
        }
        metrics['passed'] = (metrics['identity_bound'] == 0.0 and metrics['replacement_error'] <= 1e-9
                             and abs(metrics['iid_rate']) <= 1e-12
                             and 1.0 <= metrics['h_min_smooth'] <= 1.2
                             and 9.0 <= metrics['h_zero_smooth'] <= 10.1
                             and metrics['monotone_in_n'])
        return metrics


class AEPEvaluator:
    def __init__(self, config: Optional[Dict] = None) -> None:
        r"""Smoothed max-entropy rate of n i.i.d. copies against the Shannon entropy."""
        config = config or {}
        self.p = np.asarray(config.get('p', [0.75, 0.25]), dtype=float)
        self.n = config.get('n', 200)
        self.epsilon = config.get('epsilon', 0.05)
        self.tol = config.get('tol', 0.1)

    def __call__(self) -> Dict:
        print(f'Evaluation on AEP convergence (n={self.n}, eps={self.epsilon}).')
        start = time.perf_counter()
        smoothed = h_smooth_iid_classical(self.p, self.n, SmoothingParams(self.epsilon))
        elapsed = time.perf_counter() - start
        shannon = h_von_neumann(self.p).bits
        rate = smoothed.bits / self.n
        return {'rate': rate, 'shannon': shannon, 'error': abs(rate - shannon), 'seconds': elapsed,
                'passed': abs(rate - shannon) <= self.tol}


class EntropyChainEvaluator:
    def __init__(self, config: Optional[Dict] = None, seed: int = 1234) -> None:
        r"""Hmin ≤ H ≤ H₀ on random spectra and Hmax(A|B) ≤ H₀(A|B) on random bipartite states."""
        config = config or {}
        self.spectra = config.get('spectra', 1000)
        self.states = config.get('states', 200)
        self.max_dim = config.get('max_dim', 3)
        self.tol = config.get('tol', 1e-5)
        self.seed = seed

    def __call__(self) -> Dict:
        print(f'Evaluation on the entropy chain ({self.spectra} spectra, {self.states} states).')
        rng = np.random.default_rng(self.seed)

        spectrum_violations = 0
        for _ in tqdm(range(self.spectra)):
            d = int(rng.integers(1, 9))
            p = random_spectrum(d, rng, rank=int(rng.integers(1, d + 1)))
            hmin, hvn, h0 = h_min(p).bits, h_von_neumann(p).bits, h_zero(p).bits
            if not (hmin <= hvn + 1e-9 and hvn <= h0 + 1e-9):
                spectrum_violations += 1

        worst = -np.inf
        for _ in tqdm(range(self.states)):
            d_a, d_b = (int(d) for d in rng.integers(2, self.max_dim + 1, size=2))
            rho = random_density(d_a * d_b, rng, rank=int(rng.integers(1, d_a * d_b + 1)), dims=(d_a, d_b))
            worst = max(worst, h_max_cond(rho).bits - h_zero_cond(rho).bits)

        return {'spectrum_violations': spectrum_violations, 'max_hmax_minus_h0': float(worst),
                'passed': spectrum_violations == 0 and worst <= self.tol}


if __name__ == "__main__":
    configs = load_config()
    evaluation = configs['evaluation']
    print(SingleShotGapEvaluator(evaluation.get('gap'))())
    print(AEPEvaluator(evaluation.get('aep'))())
    print(EntropyChainEvaluator(evaluation.get('entropy_chain'), evaluation.get('seed', 1234))())
