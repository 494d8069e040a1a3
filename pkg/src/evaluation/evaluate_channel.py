import os
import sys
from typing import Dict, Optional

proj_dir = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
sys.path.extend([proj_dir])

import numpy as np
from tqdm import tqdm

from src.channel import adjoint, apply_matrix, corner, dilate_to_unital, random_cp_map, scale_to_subunital
from src.utils import get_logger, load_config

logger = get_logger(__name__)


class DilationEvaluator:
    def __init__(self, config: Optional[Dict] = None, seed: int = 1234) -> None:
        r"""Dilation round trip on random subunital, trace-nonincreasing qubit maps.

        Each map is dilated to a map on X⊕Y, checked for unitality and trace preservation,
        and its X→Y corner is compared with the input.
        """
        config = config or {}
        self.samples = config.get('samples', 100)
        self.tol = config.get('tol', 1e-8)
        self.seed = seed

    def __call__(self) -> Dict:
        print(f'Evaluation on dilation round trips ({self.samples} qubit maps).')
        rng = np.random.default_rng(self.seed)

        unital_res, tp_res, corner_res = [], [], []
        for _ in tqdm(range(self.samples)):
            chan = scale_to_subunital(random_cp_map(2, 2, rng, n_kraus=int(rng.integers(1, 5))),
                                      factor=rng.uniform(0.2, 1.0))
            dilated = dilate_to_unital(chan)
            eye = np.eye(dilated.dim_in)
            unital_res.append(np.abs(apply_matrix(dilated, eye) - eye).max())
            tp_res.append(np.abs(apply_matrix(adjoint(dilated), eye) - eye).max())
            corner_res.append(np.abs(corner(dilated, 2, 2).choi - chan.choi).max())

        metrics = {
            'max_unital_residual': float(np.max(unital_res)),
            'max_trace_residual': float(np.max(tp_res)),
            'max_corner_error': float(np.max(corner_res)),
        }
        metrics['passed'] = all(v <= self.tol for v in metrics.values())
        return metrics


if __name__ == "__main__":
    configs = load_config()
    print(DilationEvaluator(configs['evaluation'].get('dilation'), configs['evaluation'].get('seed', 1234))())
