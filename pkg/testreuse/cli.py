"""
The `testreuse` command line::

    testreuse gen-synth -o suite/
    testreuse minimize corpus/ -o minimized.txt
    testreuse train -o model.json
    testreuse run --model model.json -o campaign/
    testreuse compare --strategies trained_lists,ranked_average,random_sequence --seeds 20 --jobs 4 -o results/
    testreuse report results/

Results go to files and JSON on standard output, diagnostics to standard error. Exit codes: 0 on success, 1 when the
pipeline reports an error, 2 on a usage error.
"""

import argparse
import logging
import os
import sys
from collections import OrderedDict
from json import dumps
from typing import List, Optional, Sequence

from testreuse import Workbench
from testreuse.api.harness import (
    BASELINE_SCRATCH, ORIGINAL_CB, TRAINED_LISTS, STRATEGIES, Suite, read_manifest, strategy_name, write_manifest
)
from testreuse.api.coverage import RCDB_SUFFIX
from testreuse.coverage import CoverageMatrix, CoveredSet
from testreuse.data import Config, level_key
from testreuse.errors import ConfigError, TestReuseError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2


def _levels(text):
    # type: (str) -> List[float]
    return [float(v) for v in text.split(',') if v.strip()]


def _strategies(text):
    # type: (str) -> List[str]
    return [v.strip() for v in text.split(',') if v.strip()]


def parse_args(argv=None):
    # type: (Optional[Sequence[str]]) -> argparse.Namespace
    parser = argparse.ArgumentParser(
        prog='testreuse',
        description='Schedules the reuse of prior-processor fuzzing tests on a new processor-under-test.'
    )
    parser.add_argument('-v', '--verbose', action='count', default=0, help='-v for progress, -vv for detail')
    parser.add_argument('--config', help='JSON config file')
    parser.add_argument('--preset', choices=('branch', 'condition'), help='built-in config preset')
    parser.add_argument('--seed', type=int, help='master seed; also replaces the suite seed')
    parser.add_argument('--suite', help='synthetic suite spec (JSON)')
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    p = commands.add_parser('gen-synth', help='generate a synthetic suite and its ground-truth manifest')
    p.add_argument('-o', '--output', required=True, help='output directory')
    p.add_argument('--rcdb', action='store_true', help='export the origin row of every test as RCDB')

    p = commands.add_parser('parse', help='parse RCDB files into a coverage matrix')
    p.add_argument('path', help='a directory of %s files' % RCDB_SUFFIX)
    p.add_argument('-o', '--output', help='matrix file (.npz)')

    p = commands.add_parser('minimize', help='select the smallest coverage-equivalent corpus')
    p.add_argument('path', help='a directory of %s files or a matrix file (.npz)' % RCDB_SUFFIX)
    p.add_argument('--greedy', action='store_true', help='use the greedy approximation')
    p.add_argument('--time-budget', type=float, help='seconds the exact search may take')
    p.add_argument('-o', '--output', help='manifest of the selected tests')

    p = commands.add_parser('tune', help='tune the adaptive threshold of every coverage context')
    p.add_argument('--sweep', action='store_true', help='count listed tests as the number of training steps grows')
    p.add_argument('--level', type=float, help='the context the sweep trains (default: the lowest)')
    p.add_argument('-o', '--output', help='thresholds (JSON), or the sweep table (CSV)')

    p = commands.add_parser('train', help='train a test-list model on the suite trainers')
    p.add_argument('--corpus', help='manifest restricting the coverage tests')
    p.add_argument('--vulnerability', help='manifest of the vulnerability tests')
    p.add_argument('--original', action='store_true', help='train coverage lists without elimination')
    p.add_argument('--log', help='training steps (CSV)')
    p.add_argument('-o', '--output', required=True, help='model file (JSON)')

    p = commands.add_parser('run', help='run one campaign on the processor-under-test')
    p.add_argument('--model', help='model file; trained first when omitted')
    p.add_argument('--native', action='store_true', help='run the bare fuzzer')
    p.add_argument('--budget', type=int, help='iterations')
    p.add_argument('-o', '--output', help='directory for campaign.csv and summary.json')

    p = commands.add_parser('compare', help='compare reuse strategies over replicate seeds')
    p.add_argument('--strategies', type=_strategies, default=list(STRATEGIES), help='comma-separated strategies')
    p.add_argument('--training', action='store_true', help='compare adaptive and original training instead')
    p.add_argument('--model', help='model file for trained_lists campaigns; trained first when omitted')
    p.add_argument('--seeds', type=int, help='replicates per strategy')
    p.add_argument('--jobs', type=int, help='worker processes')
    p.add_argument('--budget', type=int, help='iterations per campaign')
    p.add_argument('--thresholds', type=_levels, help='comma-separated coverage thresholds')
    p.add_argument('-o', '--output', required=True, help='report directory')

    p = commands.add_parser('report', help='summarize the traces of a report directory')
    p.add_argument('path', help='report directory written by compare')
    p.add_argument('--thresholds', type=_levels, help='comma-separated coverage thresholds')
    p.add_argument('--baseline', help='strategy speedups are relative to')
    p.add_argument('-o', '--output', help='output directory (default: the report directory)')

    return parser.parse_args(argv)


def load_config(args):
    # type: (argparse.Namespace) -> Config
    if args.config and args.preset:
        raise ConfigError(error='conflicting_config', description='Use either --config or --preset.')
    if args.config:
        config = Config.from_file(args.config)
    elif args.preset == 'condition':
        config = Config.condition_preset()
    elif args.preset == 'branch':
        config = Config.branch_preset()
    else:
        config = Config()
    config.update(
        seed=args.seed,
        suite=args.suite,
        seeds=getattr(args, 'seeds', None),
        jobs=getattr(args, 'jobs', None),
        m=getattr(args, 'budget', None),
        time_budget=getattr(args, 'time_budget', None),
        thresholds=getattr(args, 'thresholds', None)
    )
    return config.validate()


def _print(document):
    sys.stdout.write(dumps(document, indent=2) + '\n')


def _suite(workbench, args):
    # type: (Workbench, argparse.Namespace) -> Suite
    return workbench.harness.gen_synthetic_suite(seed=args.seed)


def _matrix(workbench, path):
    # type: (Workbench, str) -> CoverageMatrix
    if os.path.isdir(path):
        return workbench.coverage.build_matrix(workbench.coverage.load_coverage_dir(path))
    return workbench.coverage.load_matrix(path)


def gen_synth(workbench, args):
    suite = _suite(workbench, args)
    workbench.harness.write_suite(suite, args.output, rcdb=args.rcdb)
    _print(OrderedDict([
        ('suite', suite.spec.name),
        ('points', len(suite.universe)),
        ('trainers', suite.trainers),
        ('coverageTests', len(suite.coverage_ids())),
        ('bases', len(suite.bases())),
        ('vulnerabilityTests', len(suite.vulnerability_ids()))
    ]))


def parse(workbench, args):
    matrix = _matrix(workbench, args.path)
    covered = CoveredSet(matrix.universe, matrix.union())
    if args.output:
        workbench.coverage.save_matrix(matrix, args.output)
    _print(OrderedDict([
        ('tests', len(matrix)),
        ('points', len(matrix.universe)),
        ('modules', len(matrix.universe.modules)),
        ('totalCoverage', round(covered.total_coverage(), 4))
    ]))


def minimize(workbench, args):
    matrix = _matrix(workbench, args.path)
    minimizer = workbench.minimizer
    if args.greedy:
        result = minimizer.minimize_greedy(matrix)
    else:
        result = minimizer.minimize_exact(matrix)
    if args.output:
        write_manifest(args.output, result.selected)
    _print(OrderedDict([
        ('corpusSize', result.corpus_size),
        ('objective', result.objective),
        ('reductionRate', round(result.reduction_rate, 2)),
        ('method', result.method),
        ('elapsed', round(result.elapsed, 3)),
        ('equivalent', minimizer.verify_equivalence(matrix, result.selected)),
        ('emptyRows', result.empty_rows),
        ('selected', result.selected)
    ]))


def tune(workbench, args):
    harness = workbench.harness
    trainer = workbench.trainer
    config = workbench.config
    suite = _suite(workbench, args)
    envs, _ = harness.training_envs(suite)
    corpus = harness.minimized_corpus(suite)
    if args.sweep:
        level = config.levels[0] if args.level is None else args.level
        if level not in envs:
            raise ConfigError(error='unknown_level', description='%s is not a configured level.' % level_key(level))
        theta = config.theta.get(level)
        if theta is None:
            theta = trainer.fine_tune_thresholds(
                corpus, [level], config.k, config.gamma, config.n, config.f, envs, workbench.rng('tune'),
                epsilon=config.epsilon
            )[level]
        interesting = []
        for t in suite.trainers:
            ids = suite.coverage_ids(t)
            interesting.extend(workbench.minimizer.interesting_tests(
                CoverageMatrix(suite.universe, [suite.row(t, i) for i in ids])
            ))
        variants = OrderedDict([('all', suite.coverage_ids()), ('interesting', interesting), ('minimized', corpus)])
        rows = trainer.step_sweep(variants, envs[level], config.k, config.gamma, theta, workbench.rng('sweep'))
        lines = ['variant,steps,repeat,listed'] + ['%s,%d,%d,%d' % r for r in rows]
        if args.output:
            with open(args.output, 'w', encoding='utf-8', newline='\n') as f:
                f.write('\n'.join(lines) + '\n')
        else:
            sys.stdout.write('\n'.join(lines) + '\n')
        return
    theta = trainer.fine_tune_thresholds(
        corpus, config.levels, config.k, config.gamma, config.n, config.f, envs, workbench.rng('tune'),
        epsilon=config.epsilon
    )
    document = OrderedDict([('theta', OrderedDict((level_key(l), t) for l, t in theta.items()))])
    if args.output:
        with open(args.output, 'w', encoding='utf-8', newline='\n') as f:
            f.write(dumps(document, indent=2) + '\n')
    _print(document)


def train(workbench, args):
    harness = workbench.harness
    suite = _suite(workbench, args)
    log = [] if args.log else None
    model = harness.train_suite_model(
        suite,
        adaptive=not args.original,
        corpus=read_manifest(args.corpus) if args.corpus else None,
        vuln_tests=read_manifest(args.vulnerability) if args.vulnerability else None,
        log=log
    )
    workbench.trainer.save_model(model, args.output)
    if log is not None:
        workbench.trainer.write_training_log(log, args.log)
    _print(OrderedDict([
        ('contexts', [level_key(l) for l in model.contexts]),
        ('theta', OrderedDict((level_key(l), t) for l, t in model.params.theta.items())),
        ('vulnerabilityTests', len(model.vulnerability_list)),
        ('coverageTests', OrderedDict((level_key(l), len(t)) for l, t in model.coverage_lists.items()))
    ]))


def run(workbench, args):
    harness = workbench.harness
    suite = _suite(workbench, args)
    model = workbench.trainer.load_model(args.model) if args.model else None
    strategy = BASELINE_SCRATCH if args.native else TRAINED_LISTS
    report = harness.run_strategy(strategy, suite, seed=workbench.seed, model=model)
    if args.output:
        os.makedirs(args.output, exist_ok=True)
        report.write_csv(os.path.join(args.output, 'campaign.csv'))
        report.write_summary(os.path.join(args.output, 'summary.json'))
    _print(report.summary.data)


def compare(workbench, args):
    harness = workbench.harness
    suite = _suite(workbench, args)
    if args.training:
        results = harness.compare_training(suite)
        baseline = ORIGINAL_CB
    else:
        model = workbench.trainer.load_model(args.model) if args.model else None
        results = harness.compare(suite, [strategy_name(s) for s in args.strategies], model=model)
        baseline = None
    traces = OrderedDict((name, [r.trace for r in reports]) for name, reports in results.items())
    _print(harness.emit_report(traces, workbench.config.thresholds, args.output, baseline=baseline))


def report(workbench, args):
    harness = workbench.harness
    traces = harness.load_traces(args.path)
    _print(harness.emit_report(traces, workbench.config.thresholds, args.output or args.path, baseline=args.baseline))


COMMANDS = OrderedDict([
    ('gen-synth', gen_synth),
    ('parse', parse),
    ('minimize', minimize),
    ('tune', tune),
    ('train', train),
    ('run', run),
    ('compare', compare),
    ('report', report)
])


def main(argv=None):
    # type: (Optional[Sequence[str]]) -> int
    try:
        args = parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format='%(levelname)s %(name)s: %(message)s'
    )
    try:
        workbench = Workbench(load_config(args))
        COMMANDS[args.command](workbench, args)
    except TestReuseError as e:
        sys.stderr.write('testreuse %s: %s\n' % (args.command, e))
        return EXIT_ERROR
    except OSError as e:
        sys.stderr.write('testreuse %s: %s\n' % (args.command, e))
        return EXIT_ERROR
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
