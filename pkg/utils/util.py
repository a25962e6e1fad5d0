import argparse
import os
import random
import sys

import numpy as np
import scipy
import torch

from datautil.score_codec import DIMENSIONS
from utils.exceptions import ConfigError
from utils.params import data_params, fdmpo_params, scorer_params, train_params

# args that describe the invocation rather than the run
_NOT_CONFIG = ('command', 'config', 'func')


def set_random_seed(seed=0, threads=None):
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True)
    if threads:
        torch.set_num_threads(threads)


def print_args(args, file=None):
    """Render the effective configuration as a loadable ``key = value`` file."""
    s = "# command: {}\n".format(getattr(args, 'command', ''))
    for arg, content in sorted(vars(args).items()):
        if arg in _NOT_CONFIG or content is None:
            continue
        s += "{} = {}\n".format(arg, format_config_value(content))
    if file is not None:
        print(s, end='', file=file)
    return s


def print_row(row, colwidth=10, latex=False, file=None):
    if latex:
        sep = " & "
        end_ = "\\\\"
    else:
        sep = "  "
        end_ = ""

    def format_val(x):
        if np.issubdtype(type(x), np.floating):
            x = "{:.10f}".format(x)
        return str(x).ljust(colwidth)[:colwidth]
    print(sep.join([format_val(x) for x in row]), end_, file=file or sys.stdout)


def print_environ(file=None):
    file = file or sys.stderr
    print("Environment:", file=file)
    print("\tPython: {}".format(sys.version.split(" ")[0]), file=file)
    print("\tPyTorch: {}".format(torch.__version__), file=file)
    print("\tNumPy: {}".format(np.__version__), file=file)
    print("\tSciPy: {}".format(scipy.__version__), file=file)
    print("\tThreads: {}".format(torch.get_num_threads()), file=file)


class Tee:
    def __init__(self, fname, stream, mode="a"):
        self.stream = stream
        self.file = open(fname, mode)

    def write(self, message):
        self.stream.write(message)
        self.file.write(message)
        self.flush()

    def flush(self):
        self.stream.flush()
        self.file.flush()

    def isatty(self):
        return False


def tee_output(log_dir):
    os.makedirs(log_dir, exist_ok=True)
    sys.stdout = Tee(os.path.join(log_dir, 'out.txt'), sys.stdout)
    sys.stderr = Tee(os.path.join(log_dir, 'err.txt'), sys.stderr)


def format_config_value(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (tuple, list)):
        return ','.join(format_config_value(v) for v in value)
    return str(value)


def parse_bool(text):
    lowered = str(text).strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise argparse.ArgumentTypeError('expected a boolean, got {!r}'.format(text))


def parse_score_range(text):
    parts = str(text).split(',')
    try:
        lo, hi = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError('score range must be "lo,hi", got {!r}'.format(text))
    if not 0.0 <= lo < hi <= 9.99:
        raise argparse.ArgumentTypeError('score range must satisfy 0 <= lo < hi <= 9.99, got {!r}'.format(text))
    return lo, hi


def read_config(path):
    """Parse a flat ``key = value`` file; ``#`` starts a comment line."""
    if not os.path.exists(path):
        raise ConfigError('config file not found: {}'.format(path))
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith('#'):
                continue
            if '=' not in line:
                raise ConfigError('{}:{}: expected "key = value"'.format(path, lineno))
            key, value = (part.strip() for part in line.split('=', 1))
            values[key.replace('-', '_')] = value
    return values


def apply_config(subparser, values, path):
    actions = {a.dest: a for a in subparser._actions if a.dest not in ('help',) + _NOT_CONFIG}
    converted = {}
    for key, text in values.items():
        if key not in actions:
            raise ConfigError('{}: unknown key {!r}'.format(path, key))
        action = actions[key]
        try:
            if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                value = parse_bool(text)
            elif action.type is not None:
                value = action.type(text)
            else:
                value = text
        except (argparse.ArgumentTypeError, ValueError) as e:
            raise ConfigError('{}: bad value for {}: {}'.format(path, key, e))
        if action.choices is not None and value not in action.choices:
            raise ConfigError('{}: {} must be one of {}'.format(path, key, list(action.choices)))
        converted[key] = value
        # a value from the file satisfies a required flag
        action.required = False
    subparser.set_defaults(**converted)


def check_input_path(path, what='input'):
    if not path or not os.path.exists(path):
        raise ConfigError('{} not found: {}'.format(what, path))
    return path


def check_output_dir(path):
    if not path or not os.path.isdir(path):
        raise ConfigError('output directory does not exist: {}'.format(path))
    return path


def check_output_file(path):
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise ConfigError('output directory does not exist: {}'.format(parent))
    return path


def _common_parser():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument('--config', type=str, default=None, help='flat key = value config file')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--threads', type=int, default=1, help='torch intra-op threads')
    p.add_argument('--score-range', dest='score_range', type=parse_score_range, default=(1.0, 5.0),
                   help='valid MOS range "lo,hi"')
    p.add_argument('--quiet', action='store_true', help='no progress output')
    p.add_argument('--log-dir', dest='log_dir', type=str, default=None,
                   help='mirror stdout/stderr into out.txt / err.txt here')
    return p


def _train_parser():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument('--epochs', type=int, default=train_params['epochs'])
    p.add_argument('--batch-size', dest='batch_size', type=int, default=train_params['batch_size'])
    p.add_argument('--lr', type=float, default=train_params['lr'], help="base learning rate")
    p.add_argument('--warmup-ratio', dest='warmup_ratio', type=float, default=train_params['warmup_ratio'])
    p.add_argument('--weight-decay', dest='weight_decay', type=float, default=train_params['weight_decay'])
    p.add_argument('--hidden-dim', dest='hidden_dim', type=int, default=scorer_params['hidden_dim'])
    p.add_argument('--ce-includes-digits', dest='ce_includes_digits', action='store_true',
                   help='also apply CE to digit tokens under tdrl')
    p.add_argument('--decode', type=str, default='expected', choices=['greedy', 'expected'])
    return p


def _optimizer_parser():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument('--optimizer', type=str, default='mock', choices=['mock', 'http'])
    p.add_argument('--budget', type=int, default=fdmpo_params['budget'])
    p.add_argument('--samples', type=int, default=fdmpo_params['samples'], help='V_d sample-set size')
    p.add_argument('--pool-file', dest='pool_file', type=str, default=None,
                   help='mock candidate definitions, one per line')
    p.add_argument('--warmup-epochs', dest='warmup_epochs', type=int, default=fdmpo_params['warmup_epochs'])
    p.add_argument('--base-url', dest='base_url', type=str, default=None)
    p.add_argument('--model', type=str, default=fdmpo_params['model'])
    p.add_argument('--temperature', type=float, default=fdmpo_params['temperature'])
    p.add_argument('--timeout', type=float, default=fdmpo_params['timeout'])
    p.add_argument('--max-retries', dest='max_retries', type=int, default=fdmpo_params['max_retries'])
    return p


def build_parser():
    parser = argparse.ArgumentParser(
        description='Desk-scale define-and-score image editing quality assessment')
    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True
    common, training, optimizing = _common_parser(), _train_parser(), _optimizer_parser()
    subparsers = {}

    p = sub.add_parser('gen-data', parents=[common], help='generate the synthetic dataset')
    p.add_argument('--output', type=str, required=True)
    p.add_argument('--train', type=int, default=data_params['n_train'])
    p.add_argument('--val-in', dest='val_in', type=int, default=data_params['n_val_in'])
    p.add_argument('--val-out', dest='val_out', type=int, default=data_params['n_val_out'])
    p.add_argument('--feature-dim', dest='feature_dim', type=int, default=scorer_params['feature_dim'])
    p.add_argument('--noise', type=float, default=data_params['noise_std'])
    p.add_argument('--ood-shift', dest='ood_shift', type=float, default=data_params['ood_shift'])
    subparsers['gen-data'] = p

    p = sub.add_parser('train', parents=[common, training], help='train one scorer per dimension')
    p.add_argument('--data', type=str, required=True, help='directory written by gen-data')
    p.add_argument('--output', type=str, required=True, help='checkpoint directory')
    p.add_argument('--dimension', type=str, default='visual', choices=list(DIMENSIONS) + ['all'])
    p.add_argument('--loss', type=str, default='tdrl', choices=['tdrl', 'ce-only'])
    p.add_argument('--definition-file', dest='definition_file', type=str, default=None)
    subparsers['train'] = p

    p = sub.add_parser('fdmpo', parents=[common, training, optimizing], help='optimise a metric definition')
    p.add_argument('--data', type=str, default=None)
    p.add_argument('--output', type=str, default=None)
    p.add_argument('--dimension', type=str, default='visual', choices=list(DIMENSIONS))
    p.add_argument('--initial-definition-file', dest='initial_definition_file', type=str, default=None)
    p.add_argument('--checkpoint', type=str, default=None, help='feedback model; warmup-trained if absent')
    p.add_argument('--track-final', dest='track_final', action='store_true',
                   help='retrain per trial and record its val-in score')
    p.add_argument('--track-final-epochs', dest='track_final_epochs', type=int,
                   default=fdmpo_params['track_final_epochs'])
    p.add_argument('--replay', type=str, default=None, help='recompute the best record of a history file')
    subparsers['fdmpo'] = p

    p = sub.add_parser('eval', parents=[common], help='correlation report over val-in / val-out')
    p.add_argument('--data', type=str, required=True)
    p.add_argument('--ckpt-dir', dest='ckpt_dir', type=str, default=None)
    p.add_argument('--ensemble-dir', dest='ensemble_dir', type=str, default=None,
                   help='second checkpoint directory; predictions are averaged')
    p.add_argument('--decode', type=str, default='expected', choices=['greedy', 'expected'])
    p.add_argument('--logistic-fit', dest='logistic_fit', action='store_true')
    p.add_argument('--predictions', type=str, default=None, help='score these predictions instead')
    p.add_argument('--write-predictions', dest='write_predictions', type=str, default=None)
    p.add_argument('--report', type=str, default=None, help='also write the JSON report here')
    subparsers['eval'] = p

    p = sub.add_parser('inspect-loss', parents=[common], help='TDRL breakdown for given distributions')
    p.add_argument('--dists', type=str, default=None, help='inline JSON: 3 lists of 10 probabilities')
    p.add_argument('--dists-file', dest='dists_file', type=str, default=None)
    p.add_argument('--gt', type=str, required=True, help='ground-truth score X.XX')
    p.add_argument('--pattern-logprobs', dest='pattern_logprobs', type=str, default=None,
                   help='inline JSON: 4 log-probabilities of the pattern tokens (default all 0)')
    subparsers['inspect-loss'] = p

    p = sub.add_parser('ablate', parents=[common, training, optimizing], help='toy-scale ablation table')
    p.add_argument('--data', type=str, required=True)
    p.add_argument('--output', type=str, default=None)
    p.add_argument('--dimension', type=str, default='all', choices=list(DIMENSIONS) + ['all'])
    subparsers['ablate'] = p
    return parser, subparsers


def get_args(argv=None):
    """Parse argv; values from --config sit between the flags and the built-in defaults."""
    parser, subparsers = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument('command', nargs='?')
    pre.add_argument('--config', default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config and known.command in subparsers:
        apply_config(subparsers[known.command], read_config(known.config), known.config)
    return parser.parse_args(argv)
