import os
import sys
from typing import Dict, Optional

proj_dir = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
sys.path.extend([proj_dir])

import numpy as np
from tqdm import tqdm

from src.entropy import h_min, h_zero
from src.majorize import (
    absorbed_randomness,
    check_r_bounds,
    lambda_feasible,
    majorizes,
    random_spectrum,
    uniform,
    weakly_submajorizes,
)
from src.qmat import Spectrum
from src.utils import get_logger, load_config

logger = get_logger(__name__)


def random_doubly_stochastic(d: int, rng: np.random.Generator, terms: int = 3) -> np.ndarray:
    r"""Convex combination of random permutation matrices."""
    weights = rng.dirichlet(np.ones(terms))
    return sum(w * np.eye(d)[rng.permutation(d)] for w in weights)


def majorized_pair(d: int, rng: np.random.Generator):
    r"""(p, D p) for a random doubly stochastic D, so that p ≻ D p."""
    p = random_spectrum(d, rng, rank=int(rng.integers(1, d + 1)))
    return p, Spectrum(random_doubly_stochastic(d, rng) @ p.values)


class ClosedFormEvaluator:
    def __init__(self, config: Optional[Dict] = None, seed: int = 1234) -> None:
        r"""Absorbed randomness from the LP against the pure/uniform closed forms."""
        config = config or {}
        self.samples = config.get('samples', 50)
        self.max_dim = config.get('max_dim', 5)
        self.tol = config.get('tol', 1e-6)
        self.seed = seed

    def __call__(self) -> Dict:
        print(f'Evaluation on named closed forms ({self.samples} spectra each).')
        rng = np.random.default_rng(self.seed)
        errors = {'pure_source': [], 'pure_target': [], 'uniform_source': [], 'uniform_target': []}

        for _ in tqdm(range(self.samples)):
            d = int(rng.integers(2, self.max_dim + 1))
            n = int(rng.integers(1, self.max_dim + 1))
            rho = random_spectrum(d, rng, rank=int(rng.integers(1, d + 1)))
            pure = Spectrum([1.0])
            u_n = uniform(n)

            errors['pure_source'].append(abs(absorbed_randomness(pure, rho) - h_min(rho).bits))
            errors['pure_target'].append(abs(absorbed_randomness(rho, pure) + h_zero(rho).bits))
            errors['uniform_source'].append(abs(absorbed_randomness(u_n, rho) - (h_min(rho).bits - np.log2(n))))
            errors['uniform_target'].append(abs(absorbed_randomness(rho, u_n) - (np.log2(n) - h_zero(rho).bits)))

        metrics = {f'max_error_{key}': float(np.max(value)) for key, value in errors.items()}
        metrics['passed'] = all(v <= self.tol for v in metrics.values())
        return metrics


class MajorizationPropertyEvaluator:
    def __init__(self, config: Optional[Dict] = None, seed: int = 1234) -> None:
        r"""Closure, no catalysis by uniform ancillas, identity shifting, rank law and R bounds.

        ``samples`` pairs feed the order-only checks, ``lp_samples`` pairs the checks
        that solve an absorbed-randomness LP.
        """
        config = config or {}
        self.samples = config.get('samples', 1000)
        self.lp_samples = config.get('lp_samples', self.samples)
        self.max_dim = config.get('max_dim', 5)
        self.seed = seed

    def __call__(self) -> Dict:
        print(f'Evaluation on majorization properties ({self.samples} pairs, {self.lp_samples} LP pairs).')
        rng = np.random.default_rng(self.seed)
        failures = {'closure': 0, 'no_catalysis': 0, 'identity_shift': 0, 'rank_law': 0, 'r_bounds': 0}

        for _ in tqdm(range(self.samples)):
            d1, d2 = rng.integers(2, self.max_dim + 1, size=2)
            p, q = majorized_pair(int(d1), rng)
            p2, q2 = majorized_pair(int(d2), rng)
            if not (majorizes(p.tensor(p2), q.tensor(q2), tol=1e-9)
                    and majorizes(p.direct_sum(p2), q.direct_sum(q2), tol=1e-9)):
                failures['closure'] += 1

            # half of the pairs are weakly ordered by construction, half are arbitrary
            if rng.random() < 0.5:
                a, b = p, q.scaled(rng.uniform(0.5, 1.0))
            else:
                a, b = random_spectrum(int(d1), rng), random_spectrum(int(d2), rng)
            u_n = uniform(int(rng.integers(2, 5)))
            if weakly_submajorizes(a, b) != weakly_submajorizes(a.tensor(u_n), b.tensor(u_n)):
                failures['no_catalysis'] += 1

        for _ in tqdm(range(self.lp_samples)):
            d1, d2 = rng.integers(1, self.max_dim + 1, size=2)
            p = random_spectrum(int(d1), rng, rank=int(rng.integers(1, d1 + 1)))
            q = random_spectrum(int(d2), rng, rank=int(rng.integers(1, d2 + 1)))
            n = int(rng.integers(2, 4))

            value = absorbed_randomness(p, q)
            if abs(absorbed_randomness(uniform(n).tensor(p), q) - (value - np.log2(n))) > 1e-6:
                failures['identity_shift'] += 1

            lam = value - rng.uniform(0.0, 1.5)
            feasible, witness = lambda_feasible(p, q, lam)
            if not feasible or p.rank() > 2.0 ** (-lam) * q.rank() + 1e-6 \
                    or np.abs(witness.apply(p) - q.values).max() > 1e-8:
                failures['rank_law'] += 1

            try:
                check_r_bounds(p, q)
            except AssertionError:
                failures['r_bounds'] += 1

        metrics = {f'{key}_failures': value for key, value in failures.items()}
        metrics['passed'] = not any(failures.values())
        return metrics


if __name__ == "__main__":
    configs = load_config()
    seed = configs['evaluation'].get('seed', 1234)
    print(ClosedFormEvaluator(configs['evaluation'].get('closed_forms'), seed)())
    print(MajorizationPropertyEvaluator(configs['evaluation'].get('majorization'), seed)())
