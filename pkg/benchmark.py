import os

import pandas as pd

from src.evaluation.evaluate_channel import DilationEvaluator
from src.evaluation.evaluate_entropy import AEPEvaluator, EntropyChainEvaluator, SingleShotGapEvaluator
from src.evaluation.evaluate_landauer import (
    ClassicalOracleEvaluator,
    InfeasibilityEvaluator,
    OptimalityEvaluator,
    WStateEvaluator,
)
from src.evaluation.evaluate_majorization import ClosedFormEvaluator, MajorizationPropertyEvaluator
from src.utils import load_config


def _summary(name: str, metrics: dict) -> str:
    shown = ', '.join(f"{key}: {value:.3e}" if isinstance(value, float) else f"{key}: {value}"
                      for key, value in metrics.items() if key != 'passed')
    return f"{name} [{'PASS' if metrics['passed'] else 'FAIL'}] {shown}"


def eval(config_yaml='config/landauer_base.yaml'):

    log_dir = 'eval_logs'
    os.makedirs(log_dir, exist_ok=True)

    configs = load_config(config_yaml)
    evaluation = configs['evaluation']
    seed = evaluation.get('seed', 1234)

    evaluators = [
        ('W-state', WStateEvaluator(evaluation.get('wstate'))),
        ('Optimality', OptimalityEvaluator(evaluation.get('optimality'), seed)),
        ('Classical oracle', ClassicalOracleEvaluator(evaluation.get('classical'), seed)),
        ('Closed forms', ClosedFormEvaluator(evaluation.get('closed_forms'), seed)),
        ('Majorization', MajorizationPropertyEvaluator(evaluation.get('majorization'), seed)),
        ('Single-shot gap', SingleShotGapEvaluator(evaluation.get('gap'))),
        ('AEP', AEPEvaluator(evaluation.get('aep'))),
        ('Entropy chain', EntropyChainEvaluator(evaluation.get('entropy_chain'), seed)),
        ('Dilation', DilationEvaluator(evaluation.get('dilation'), seed)),
        ('Infeasibility', InfeasibilityEvaluator(evaluation.get('infeasibility'), seed)),
    ]

    print(f'-------  Start Evaluation  -------')

    msgs, rows = [], []
    for name, evaluator in evaluators:
        metrics = evaluator()
        msg = _summary(name, metrics)
        print(msg)
        msgs.append(msg)
        rows.append({'family': name, **metrics})

    log_path = os.path.join(log_dir, 'eval_results.txt')
    with open(log_path, 'w') as fp:
        for msg in msgs:
            fp.write(msg + '\n')
    csv_path = os.path.join(log_dir, 'eval_results.csv')
    pd.DataFrame(rows).to_csv(csv_path, index=False)
    print(f'Eval log is written to {log_path} and {csv_path} ...')
    print('-------------------------  Done  ---------------------------')
    return all(row['passed'] for row in rows)


if __name__ == '__main__':
    eval()
