"""Command-line entry point.

    python main.py gen-data --output data/
    python main.py fdmpo --data data/ --output runs/fdmpo-visual --dimension visual
    python main.py train --data data/ --output runs/ckpt --dimension all
    python main.py eval --data data/ --ckpt-dir runs/ckpt
    python main.py inspect-loss --dists '[[...], [...], [...]]' --gt 4.20
    python main.py ablate --data data/ --output runs/ablate

Exit codes: 0 success, 1 training diverged, 2 usage/config error,
3 degenerate evaluation result, 4 optimizer endpoint failure.
"""

import hashlib
import json
import os
import sys

import numpy as np
import torch

from alg import trainer
from alg.defvalue import dataset_samples, v_d_single
from alg.fdmpo import load_history, run_fdmpo, select_best, write_trajectory
from alg.optimizer_client import load_pool, make_endpoint, make_optimizer
from datautil.getdataloader import sample_subset
from datautil.score_codec import DIMENSIONS, parse_score
from datautil.synth_data import SPLITS, GeneratorSpec, generate
from datautil.util import ScoreDataset, parse_json_line, read_records, read_splits, split_path, write_records
from loss.tdrl import l_score_grad_from_dists, l_tdrl
from network.prompt_embed import embed_prompt
from network.toy_scorer import load_checkpoint, save_checkpoint
from utils.exceptions import (ConfigError, DegenerateInputError, DomainError, EndpointError, ProtocolError,
                              ScoreParseError, ShapeError, TrainingDivergedError)
from utils.metrics import SPLIT_KINDS, correlation_cell, final_score
from utils.params import candidate_pools, initial_definitions
from utils.util import (check_input_path, check_output_dir, get_args, print_args, print_environ, print_row,
                        set_random_seed, tee_output)

EXIT_OK, EXIT_DIVERGED, EXIT_CONFIG, EXIT_DEGENERATE, EXIT_ENDPOINT = 0, 1, 2, 3, 4
EVAL_SPLITS = {'in': 'val_in', 'out': 'val_out'}


def info(message, args=None):
    if args is None or not args.quiet:
        print('[INFO] {}'.format(message), file=sys.stderr)


def emit_json(doc):
    print(json.dumps(doc, indent=2, sort_keys=True))


def file_digest(path):
    with open(path, 'rb') as f:
        return hashlib.sha256(f.read()).hexdigest()


def read_text(path):
    check_input_path(path, 'definition file')
    with open(path) as f:
        text = f.read().strip()
    if not text:
        raise ConfigError('definition file is empty: {}'.format(path))
    return text


def checkpoint_path(directory, dimension):
    return os.path.join(directory, '{}.ckpt.json'.format(dimension))


def selected_dimensions(dimension):
    return list(DIMENSIONS) if dimension == 'all' else [dimension]


def train_config(args, dimension, loss='tdrl', epochs=None):
    return trainer.TrainConfig(
        loss=loss.replace('-', '_'), epochs=args.epochs if epochs is None else epochs,
        batch_size=args.batch_size, lr=args.lr, warmup_ratio=args.warmup_ratio, seed=args.seed,
        dimension=dimension, hidden_dim=args.hidden_dim, weight_decay=args.weight_decay,
        ce_includes_digits=args.ce_includes_digits, score_range=args.score_range,
        decode=args.decode).validate()


def cmd_gen_data(args):
    check_output_dir(args.output)
    spec = GeneratorSpec(seed=args.seed, n_train=args.train, n_val_in=args.val_in, n_val_out=args.val_out,
                         feature_dim=args.feature_dim, noise_std=args.noise, ood_shift=args.ood_shift,
                         score_range=args.score_range)
    dataset = generate(spec)
    counts = {}
    for split in SPLITS:
        write_records(split_path(args.output, split), dataset.splits[split])
        counts[split] = len(dataset.splits[split])
    info('wrote {} to {}'.format(counts, args.output), args)
    emit_json({'output': args.output, 'counts': counts})
    return EXIT_OK


def cmd_train(args):
    check_output_dir(args.output)
    dimensions = selected_dimensions(args.dimension)
    if args.definition_file and len(dimensions) > 1:
        raise ConfigError('--definition-file applies to a single --dimension')
    results = {}
    for dimension in dimensions:
        splits = read_splits(args.data, dimension, ('train', 'val_in'))
        definition = read_text(args.definition_file) if args.definition_file else initial_definitions[dimension]
        config = train_config(args, dimension, args.loss)
        algorithm, report = trainer.train(splits['train'], config, definition, heldout=splits['val_in'],
                                          verbose=not args.quiet)
        path = checkpoint_path(args.output, dimension)
        save_checkpoint(algorithm.scorer, path, definition, dimension, extra={'loss': config.loss})
        with open(os.path.join(args.output, '{}.report.json'.format(dimension)), 'w') as f:
            json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        info('{}: held-out MAE {:.4f} SRCC {} -> {}'.format(
            dimension, report.heldout_mae, report.heldout_srcc, path), args)
        results[dimension] = {'checkpoint': path, 'sha256': file_digest(path), 'report': report.to_dict()}
    emit_json(results)
    return EXIT_OK


def feedback_model(args, dimension, train_records, definition):
    """Feedback scorer for V_d: a checkpoint, or a brief warmup run on the initial definition."""
    checkpoint = getattr(args, 'checkpoint', None)
    if checkpoint:
        scorer, meta = load_checkpoint(check_input_path(checkpoint, 'checkpoint'))
        info('feedback model from {} ({})'.format(checkpoint, meta.get('dimension')), args)
        return scorer
    info('warmup training of the feedback model for {} epochs'.format(args.warmup_epochs), args)
    algorithm, _ = trainer.train(train_records, train_config(args, dimension, 'tdrl', args.warmup_epochs),
                                 definition, verbose=not args.quiet)
    return algorithm.scorer


def optimize_definition(args, dimension, splits, output=None):
    """Warmup (unless a checkpoint is given), then FDMPO. Returns (best, history, initial, finals)."""
    pool = load_pool(args.pool_file) if args.pool_file else candidate_pools[dimension]
    endpoint = make_endpoint(args, pool)
    optimizer = make_optimizer(endpoint) if args.budget > 0 else None
    initial = (read_text(args.initial_definition_file)
               if getattr(args, 'initial_definition_file', None) else initial_definitions[dimension])
    scorer = feedback_model(args, dimension, splits['train'], initial)
    subset = sample_subset(ScoreDataset(splits['train'], dimension), args.samples, args.seed)
    info('V_d over a fixed subset of {} samples'.format(len(subset)), args)

    finals = None
    on_trial = None
    if getattr(args, 'track_final', False):
        finals = {}
        heldout = ScoreDataset(splits['val_in'], dimension)

        def on_trial(record):
            config = train_config(args, dimension, 'tdrl', args.track_final_epochs)
            algorithm, _ = trainer.train(splits['train'], config, record.definition, verbose=False)
            pred = algorithm.predict(heldout.x, config.decode)
            cell = correlation_cell(pred, heldout.labels)
            finals[record.iteration] = None if cell is None else (cell['srcc'] + cell['plcc']) / 2

    history_path = os.path.join(output, 'history.jsonl') if output else None
    best, history = run_fdmpo(initial, dataset_samples(subset), scorer, endpoint, args.budget,
                              history_path=history_path, optimizer=optimizer, on_trial=on_trial,
                              verbose=not args.quiet)
    return best, history, initial, finals


def cmd_fdmpo(args):
    if args.replay:
        history = load_history(args.replay)
        best = select_best(history)
        emit_json({'best': best.to_json(), 'n_trials': len(history)})
        return EXIT_OK
    if not args.data or not args.output:
        raise ConfigError('fdmpo needs --data and --output (or --replay)')
    check_output_dir(args.output)
    if args.optimizer == 'http':
        # fail on a missing credential before any training or network call
        make_endpoint(args).validate()
    splits = read_splits(args.data, args.dimension, ('train', 'val_in'))
    best, history, _, finals = optimize_definition(args, args.dimension, splits, args.output)
    with open(os.path.join(args.output, 'best_definition.txt'), 'w') as f:
        f.write(best.definition + '\n')
    write_trajectory(os.path.join(args.output, 'trajectory.csv'), history, finals)
    info('best definition: iteration {} with V_d {:.6f}'.format(best.iteration, best.v_d.v), args)
    emit_json({'best': best.to_json(), 'n_trials': len(history), 'output': args.output})
    return EXIT_OK


def load_predictions(path):
    check_input_path(path, 'predictions file')
    predictions = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            row = parse_json_line(path, lineno, line)
            if not isinstance(row, dict) or 'id' not in row:
                raise ConfigError('{}:{}: expected a JSON object with an id'.format(path, lineno))
            predictions[row['id']] = row
    return predictions


def checkpoint_predictions(directory, dimension, records, mode, score_range):
    path = check_input_path(checkpoint_path(directory, dimension), 'checkpoint')
    scorer, meta = load_checkpoint(path)
    prompt = torch.from_numpy(embed_prompt(meta.get('definition') or '', scorer.embed_dim))
    return scorer.decode(prompt, ScoreDataset(records, dimension).x, mode, score_range)


def collect_predictions(args, splits):
    """predictions[split][dimension] -> array aligned with splits[split]."""
    if args.predictions:
        supplied = load_predictions(args.predictions)
        try:
            return {split: {dim: np.array([supplied[r.id][dim] for r in records], dtype=np.float64)
                            for dim in DIMENSIONS}
                    for split, records in splits.items()}
        except KeyError as e:
            raise ConfigError('predictions file has no entry for {}'.format(e))
        except (TypeError, ValueError) as e:
            raise ConfigError('predictions file holds a non-numeric score: {}'.format(e))
    if not args.ckpt_dir:
        raise ConfigError('eval needs --ckpt-dir or --predictions')
    predictions = {}
    for split, records in splits.items():
        predictions[split] = {}
        for dim in DIMENSIONS:
            pred = checkpoint_predictions(args.ckpt_dir, dim, records, args.decode, args.score_range)
            if args.ensemble_dir:
                other = checkpoint_predictions(args.ensemble_dir, dim, records, args.decode, args.score_range)
                pred = trainer.ensemble_average(pred, other)
            predictions[split][dim] = pred
    return predictions


def correlation_report(splits, predictions, logistic_fit=False, dimensions=DIMENSIONS):
    cells = {}
    for kind in SPLIT_KINDS:
        split = EVAL_SPLITS[kind]
        cells[kind] = {dim: None for dim in DIMENSIONS}
        for dim in dimensions:
            labels = np.array([r.label(dim) for r in splits[split]])
            cells[kind][dim] = correlation_cell(predictions[split][dim], labels, logistic_fit)
    return final_score(cells)


def print_report(report, file=sys.stderr):
    for row in report.table_rows():
        print_row(row, colwidth=13, file=file)


def cmd_eval(args):
    splits = {split: read_records(split_path(args.data, split), DIMENSIONS) for split in EVAL_SPLITS.values()}
    predictions = collect_predictions(args, splits)
    report = correlation_report(splits, predictions, args.logistic_fit)
    if args.write_predictions:
        with open(args.write_predictions, 'w') as f:
            for split, records in splits.items():
                for i, record in enumerate(records):
                    row = {'id': record.id, 'split': split}
                    row.update({dim: float(predictions[split][dim][i]) for dim in DIMENSIONS})
                    f.write(json.dumps(row, sort_keys=True) + '\n')
    if not args.quiet:
        print_report(report)
    emit_json(report.to_dict())
    if args.report:
        with open(args.report, 'w') as f:
            json.dump(report.to_dict(), f, indent=2, sort_keys=True)
    if not report.complete:
        print('[WARN] undefined cells (constant predictions): {}'.format(
            ', '.join(report.to_dict()['undefined'])), file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


def _json_arg(inline, path, what):
    if inline is not None:
        return json.loads(inline)
    if path is not None:
        with open(check_input_path(path, what)) as f:
            return json.load(f)
    raise ConfigError('{} missing: pass it inline or as a file'.format(what))


def cmd_inspect_loss(args):
    try:
        dists = np.asarray(_json_arg(args.dists, args.dists_file, 'digit distributions'), dtype=np.float64)
        pattern = (np.zeros(4) if args.pattern_logprobs is None
                   else np.asarray(json.loads(args.pattern_logprobs), dtype=np.float64))
    except ValueError as e:
        raise ConfigError('cannot read distributions: {}'.format(e))
    if pattern.shape != (4,):
        raise ShapeError('expected 4 pattern log-probabilities, got shape {}'.format(pattern.shape))
    g = parse_score(args.gt)
    breakdown = l_tdrl(pattern, dists, g)
    grad = l_score_grad_from_dists(dists, g)
    doc = breakdown.to_dict()
    doc.update({
        'gt': list(g),
        'l_score_grad': grad.tolist(),
        'v_d': v_d_single([dists[t][g[t]] for t in range(3)]),
    })
    emit_json(doc)
    return EXIT_OK


ABLATION_SETTINGS = (
    ('full', 'best', 'tdrl'),
    ('wo_fdmpo', 'initial', 'tdrl'),
    ('wo_tdrl', 'best', 'ce_only'),
)


def cmd_ablate(args):
    if args.output:
        check_output_dir(args.output)
    dimensions = selected_dimensions(args.dimension)
    all_splits = {split: read_records(split_path(args.data, split), dimensions) for split in SPLITS}
    predictions = {name: {split: {} for split in EVAL_SPLITS.values()} for name, _, _ in ABLATION_SETTINGS}
    definitions = {}
    for dimension in dimensions:
        fdmpo_dir = None
        if args.output:
            fdmpo_dir = os.path.join(args.output, 'fdmpo-{}'.format(dimension))
            os.makedirs(fdmpo_dir, exist_ok=True)
        best, _, initial, _ = optimize_definition(args, dimension, all_splits, fdmpo_dir)
        definitions[dimension] = {'initial': initial, 'best': best.definition, 'best_v_d': best.v_d.v}
        for name, which, loss in ABLATION_SETTINGS:
            config = train_config(args, dimension, loss)
            info('{} / {}: training with the {} definition'.format(dimension, name, which), args)
            algorithm, _ = trainer.train(all_splits['train'], config, definitions[dimension][which],
                                         verbose=not args.quiet)
            for split in EVAL_SPLITS.values():
                predictions[name][split][dimension] = algorithm.predict(
                    ScoreDataset(all_splits[split], dimension).x, config.decode)
    results = {}
    for name, _, _ in ABLATION_SETTINGS:
        report = correlation_report(all_splits, predictions[name], dimensions=dimensions)
        results[name] = report.to_dict()
        if not args.quiet:
            print('==== {} ===='.format(name), file=sys.stderr)
            print_report(report)
    doc = {'definitions': definitions, 'settings': results}
    if args.output:
        with open(os.path.join(args.output, 'ablation.json'), 'w') as f:
            json.dump(doc, f, indent=2, sort_keys=True)
    emit_json(doc)
    return EXIT_OK


COMMANDS = {
    'gen-data': cmd_gen_data,
    'train': cmd_train,
    'fdmpo': cmd_fdmpo,
    'eval': cmd_eval,
    'inspect-loss': cmd_inspect_loss,
    'ablate': cmd_ablate,
}


def main(argv=None):
    try:
        args = get_args(argv)
    except SystemExit as e:
        return e.code
    except ConfigError as e:
        print('[ERROR] {}'.format(e), file=sys.stderr)
        return EXIT_CONFIG
    if args.log_dir:
        tee_output(args.log_dir)
    set_random_seed(args.seed, args.threads)
    if not args.quiet:
        print_environ()
        print_args(args, file=sys.stderr)
    output = getattr(args, 'output', None)
    if output and os.path.isdir(output):
        with open(os.path.join(output, 'effective.cfg'), 'w') as f:
            f.write(print_args(args))
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ShapeError, DomainError, ScoreParseError) as e:
        print('[ERROR] {}'.format(e), file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateInputError as e:
        print('[ERROR] {}'.format(e), file=sys.stderr)
        return EXIT_DEGENERATE
    except (EndpointError, ProtocolError) as e:
        print('[ERROR] {}'.format(e), file=sys.stderr)
        return EXIT_ENDPOINT
    except TrainingDivergedError as e:
        print('[ERROR] {}'.format(e), file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == '__main__':
    sys.exit(main())
