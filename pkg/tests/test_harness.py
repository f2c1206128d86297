import json
import os
from collections import OrderedDict
from fractions import Fraction

import numpy as np
import pytest

from testreuse.api import runtime as runtime_
from testreuse.api.harness import (
    ADAPTIVE_CB, BASELINE_SCRATCH, ORIGINAL_CB, PUT, RANDOM_SEQUENCE, RANKED_AVERAGE, RANKED_SINGLE, SAME_SEQUENCE,
    TRAINED_LISTS, SimulatedFuzzer, read_manifest, strategy_name
)
from testreuse.coverage import CoveredSet
from testreuse.data import Test, TestKind, level_key
from testreuse.errors import FuzzerError, SuiteSpecError

from conftest import small_spec


class TestSuite:

    def test_deterministic(self, workbench, suite):
        again = workbench.harness.gen_synthetic_suite(small_spec())
        assert again.manifest() == suite.manifest()
        for test_id in suite.coverage_ids()[:10]:
            assert again.row(PUT, test_id) == suite.row(PUT, test_id)

    def test_seed_changes_the_suite(self, workbench, suite):
        other = workbench.harness.gen_synthetic_suite(small_spec(), seed=8)
        assert other.spec.seed == 8
        assert other.manifest()['tests'] != suite.manifest()['tests']

    def test_shape(self, suite):
        assert suite.trainers == ['p0', 'p1']
        assert len(suite.coverage_ids('p0')) == 60
        assert len(suite.bases('p0')) == 20
        assert suite.vulnerability_ids() == ['p0v00', 'p1v00']
        assert len(suite.bug_points) == 2
        assert sum(suite.manifest()['tiers'].values()) == 400

    def test_derived_tests_stay_within_their_base(self, suite):
        for test_id in suite.coverage_ids():
            entry = suite.entries[test_id]
            base = suite.origin_bits(entry['base'])
            bits = suite.origin_bits(test_id)
            if entry['derivation'] == 'duplicate':
                assert np.array_equal(bits, base)
            else:
                assert not np.any(bits & ~base)

    def test_full_similarity_carries_rows_over(self, workbench):
        suite = workbench.harness.gen_synthetic_suite(small_spec(similarity=1.0))
        for test_id in suite.coverage_ids():
            assert np.array_equal(suite.row(PUT, test_id).bits, suite.origin_bits(test_id))

    def test_vulnerability_mutants_reach_bug_points(self, suite):
        for test_id in suite.vulnerability_ids():
            bugs = suite.entries[test_id]['bugPoints']
            for index in (1, 2, 5):
                assert suite.put.mutant_row(test_id, index).bits[bugs].all()

    def test_minimized_corpus_fits_in_the_bases(self, workbench, suite):
        minimized = workbench.harness.minimized_corpus(suite)
        assert 0 < len(minimized) <= len(suite.bases())
        assert set(minimized) <= set(suite.coverage_ids())

    def test_inconsistent_spec(self, workbench):
        with pytest.raises(SuiteSpecError):
            workbench.harness.gen_synthetic_suite(small_spec(bases_per_trainer=100))


class TestSimulatedFuzzer:

    def test_mutant_ids_count_per_parent(self, suite):
        fuzzer = SimulatedFuzzer(suite.put)
        test = suite.tests['p0t0001']
        first, second = fuzzer.mutate(test), fuzzer.mutate(test)
        assert (first.test_id, second.test_id) == ('p0t0001~1', 'p0t0001~2')
        assert second.parent == 'p0t0001' and second.mutant_index == 2
        assert fuzzer.execute(first) == suite.put.mutant_row('p0t0001', 1, 'p0t0001~1')

    def test_native_streams_follow_the_seed(self, suite):
        def natives(seed):
            fuzzer = SimulatedFuzzer(suite.put, seed)
            return [fuzzer.execute(fuzzer.generate_native()).bits.tolist() for _ in range(3)]

        assert natives(1) == natives(1)
        assert natives(1) != natives(2)

    def test_unknown_test(self, suite):
        with pytest.raises(FuzzerError):
            SimulatedFuzzer(suite.put).execute(Test(test_id='elsewhere'))


class TestStrategyName:

    @pytest.mark.parametrize('name, expected', [
        ('same', SAME_SEQUENCE),
        ('Ranked-PP', RANKED_AVERAGE),
        ('ranked_single_pp', RANKED_SINGLE),
        ('trained_lists', TRAINED_LISTS),
        ('scratch', BASELINE_SCRATCH)
    ])
    def test_aliases(self, name, expected):
        assert strategy_name(name) == expected

    def test_unknown(self):
        with pytest.raises(SuiteSpecError):
            strategy_name('fastest')


class TestSequence:

    def test_ranked_average(self, workbench, suite):
        """Tests are ranked by mean standalone coverage over the trainers, ties by id."""
        def mean(test_id):
            return Fraction(sum(suite.row(p, test_id).hits for p in suite.trainers), len(suite.trainers))

        expected = sorted(suite.coverage_ids(), key=lambda t: (-mean(t), t))
        assert workbench.harness.sequence('ranked', suite) == expected

    def test_ranked_single(self, workbench, suite):
        sequence = workbench.harness.sequence(RANKED_SINGLE, suite)
        hits = [suite.row(suite.entries[t]['origin'], t).hits for t in sequence]
        assert hits == sorted(hits, reverse=True)
        assert sorted(sequence) == sorted(suite.coverage_ids())

    def test_random_is_a_permutation(self, workbench, suite):
        sequence = workbench.harness.sequence('random', suite, np.random.default_rng(0))
        assert sorted(sequence) == sorted(suite.coverage_ids())

    def test_no_sequence_for_trained_lists(self, workbench, suite):
        with pytest.raises(SuiteSpecError):
            workbench.harness.sequence(TRAINED_LISTS, suite)


class TestRunStrategy:

    def test_same_sequence_replays_the_first_trainer(self, workbench, suite):
        """The trace is the cumulative coverage of the first trainer's corpus on the processor-under-test."""
        report = workbench.harness.run_strategy('same', suite, budget=60)
        covered = CoveredSet(suite.universe)
        expected = []
        for test_id in suite.coverage_ids('p0'):
            covered = covered.merge(suite.row(PUT, test_id))
            expected.append(covered.total_coverage())
        assert report.trace == expected
        assert report.summary.phase_starts == {'replay': 1}

    @pytest.mark.parametrize('strategy', ['same', 'random', 'ranked', 'ranked_single', 'baseline'])
    def test_traces_grow(self, workbench, suite, strategy):
        trace = workbench.harness.run_strategy(strategy, suite, budget=120, seed=3).trace
        assert len(trace) == 120
        assert all(a <= b for a, b in zip(trace, trace[1:]))

    def test_trained_lists_reaches_every_bug_point(self, workbench, suite):
        """Vulnerability tests run their mutants before they can be dropped, and mutants reach the bug points."""
        model = workbench.harness.train_suite_model(suite)
        report = workbench.harness.run_strategy(TRAINED_LISTS, suite, budget=200, seed=1, model=model)
        summary = report.summary
        assert summary.phase_starts['vulnerability'] == 1
        assert summary.bug_points == 2
        assert len(summary.bug_points_reached) == 2
        end = summary.phase_starts.get('coverage', 200)
        assert all(i <= end for i in summary.bug_points_reached.values())


class TestTraining:

    def test_model(self, workbench, suite):
        model = workbench.harness.train_suite_model(suite)
        model.validate()
        assert model.contexts == [45.0, 50.0, 55.0]
        assert sorted(model.vulnerability_list.test_ids) == ['p0v00', 'p1v00']
        assert model.vulnerability_list.kind == TestKind.VULNERABILITY
        minimized = set(workbench.harness.minimized_corpus(suite))
        for trained in model.coverage_lists.values():
            assert set(trained.test_ids) <= minimized

    def test_lists_stay_within_the_effective_arms(self, workbench, suite, tmp_path):
        """The manifest alone tells whether training listed only tests its contexts reward."""
        harness = workbench.harness
        harness.write_suite(suite, str(tmp_path))
        effective = json.loads((tmp_path / 'manifest.json').read_text(encoding='utf-8'))['effectiveArms']
        assert list(effective) == ['45', '50', '55']
        assert effective == harness.effective_arms(suite)
        coverage_ids = set(suite.coverage_ids())
        assert all(set(ids) <= coverage_ids for ids in effective.values())
        assert effective['45']
        model = harness.train_suite_model(suite)
        assert any(len(trained) for trained in model.coverage_lists.values())
        for level, trained in model.coverage_lists.items():
            assert set(trained.test_ids) <= set(effective[level_key(level)])

    def test_training_envs(self, workbench, suite):
        envs, vuln_env = workbench.harness.training_envs(suite)
        assert list(envs) == [45.0, 50.0, 55.0]
        assert vuln_env.context == 0.0
        test_id = suite.vulnerability_ids()[0]
        assert vuln_env.reward(test_id) in {
            suite.universe.percent(suite.row(p, test_id).hits) for p in suite.trainers
        }


class TestCompare:

    def test_shape(self, workbench, suite):
        results = workbench.harness.compare(suite, ['same', 'baseline'], seeds=2, budget=50, jobs=1)
        assert list(results) == [SAME_SEQUENCE, BASELINE_SCRATCH]
        assert [len(r) for r in results.values()] == [2, 2]
        assert all(len(r.trace) == 50 for reports in results.values() for r in reports)

    def test_workers_match_serial_runs(self, workbench, suite):
        serial = workbench.harness.compare(suite, ['random', 'baseline'], seeds=2, budget=40, jobs=1)
        parallel = workbench.harness.compare(suite, ['random', 'baseline'], seeds=2, budget=40, jobs=2)
        assert serial == parallel

    def test_replicate_seeds_differ(self, workbench):
        harness = workbench.harness
        assert harness.replicate_seed('random_sequence', 0) != harness.replicate_seed('random_sequence', 1)
        assert harness.replicate_seed('random_sequence', 0) == harness.replicate_seed('random_sequence', 0)


def crossing_at(length, index, level=70.0):
    """A trace of `length` tests that first reaches `level` on test `index` (1-based)."""
    return [0.0] * (index - 1) + [level] * (length - index + 1)


class TestCoverageSpeedup:

    def test_slower(self, workbench):
        result = workbench.harness.coverage_speedup(crossing_at(12000, 11246), crossing_at(12000, 8548), 65.0)
        assert result.ratio == pytest.approx(0.76, abs=0.005)
        assert (result.tests_ref, result.tests_base, result.censored) == (11246, 8548, False)

    def test_faster(self, workbench):
        result = workbench.harness.coverage_speedup(crossing_at(600, 100), crossing_at(600, 500), 65.0)
        assert result.ratio == 5.0

    def test_identical(self, workbench):
        trace = crossing_at(50, 20)
        assert workbench.harness.coverage_speedup(trace, trace, 65.0).ratio == 1.0

    def test_censored(self, workbench):
        harness = workbench.harness
        result = harness.coverage_speedup([10.0] * 300, crossing_at(300, 150), 65.0)
        assert result.censored
        assert result.ratio == 0.5
        both = harness.coverage_speedup([10.0] * 300, [20.0] * 300, 65.0)
        assert both.censored
        assert both.ratio is None


class TestEmitReport:

    def test_single_strategy(self, workbench, tmp_path):
        rows = workbench.harness.emit_report({'a': [crossing_at(10, 4)]}, [65.0], str(tmp_path))
        assert rows[0]['speedup_65'] == 1.0
        assert rows[0]['tests_to_65'] == 4.0

    def test_speedups(self, workbench, tmp_path):
        harness = workbench.harness
        traces = OrderedDict([
            (BASELINE_SCRATCH, [crossing_at(100, 80), crossing_at(100, 60)]),
            ('trained_lists', [crossing_at(100, 10), crossing_at(100, 20)]),
            ('random_sequence', [[10.0] * 100, [5.0] * 100])
        ])
        rows = harness.emit_report(traces, [65.0], str(tmp_path))
        by_name = {r['strategy']: r for r in rows}
        assert by_name['trained_lists']['speedup_65'] == pytest.approx(70.0 / 15.0)
        assert by_name['random_sequence']['censored_65'] == 2
        assert by_name['random_sequence']['speedup_65'] == pytest.approx(0.7)
        assert by_name[BASELINE_SCRATCH]['speedup_65'] == 1.0
        header = (tmp_path / 'summary.csv').read_text(encoding='utf-8').splitlines()[0]
        assert header == 'strategy,replicates,final_coverage,tests_to_65,censored_65,speedup_65'
        summary = json.loads((tmp_path / 'summary.json').read_text(encoding='utf-8'))
        assert summary['baseline'] == BASELINE_SCRATCH
        assert harness.load_traces(str(tmp_path)) == OrderedDict(sorted(traces.items()))

    def test_matches_coverage_speedup(self, workbench, tmp_path):
        harness = workbench.harness
        ref, base = crossing_at(400, 37), crossing_at(400, 211)
        rows = harness.emit_report(OrderedDict([('base', [base]), ('ref', [ref])]), [65.0], str(tmp_path))
        assert rows[1]['speedup_65'] == harness.coverage_speedup(ref, base, 65.0).ratio

    def test_nothing_to_report(self, workbench, tmp_path):
        with pytest.raises(SuiteSpecError):
            workbench.harness.emit_report({}, [65.0], str(tmp_path))


class TestWriteSuite:

    def test_files(self, workbench, suite, tmp_path):
        harness = workbench.harness
        harness.write_suite(suite, str(tmp_path), rcdb=True)
        assert read_manifest(str(tmp_path / 'corpus.txt')) == suite.coverage_ids()
        assert read_manifest(str(tmp_path / 'vulnerability.txt')) == suite.vulnerability_ids()
        assert harness.load_suite_spec(str(tmp_path / 'suite.json')) == suite.spec
        manifest = json.loads((tmp_path / 'manifest.json').read_text(encoding='utf-8'))
        assert manifest['bugPoints'] == [str(p) for p in suite.bug_points]
        text = (tmp_path / 'rcdb' / 'p1t0003.rcdb').read_text(encoding='utf-8')
        row = workbench.coverage.parse_coverage_db(text, test_id='p1t0003')
        assert row.universe == suite.universe
        assert np.array_equal(row.bits, suite.origin_bits('p1t0003'))

    def test_unreadable_spec(self, workbench, tmp_path):
        with pytest.raises(SuiteSpecError):
            workbench.harness.load_suite_spec(str(tmp_path / 'missing.json'))


def crossings(reports, threshold, budget):
    """Tests each replicate needed to reach `threshold`; a censored replicate counts one past the budget."""
    return [runtime_.tests_to_threshold(r.trace, threshold) or budget + 1 for r in reports]


@pytest.mark.slow
class TestDefaultBenchmark:
    """
    20-seed campaigns on the built-in benchmark suite at the 65% threshold.
    """

    @pytest.fixture
    def benchmark(self, default_workbench):
        harness = default_workbench.harness
        return harness, harness.gen_synthetic_suite(), min(4, os.cpu_count() or 1)

    def test_adaptive_training_reaches_the_threshold_sooner(self, default_workbench, benchmark):
        harness, suite, jobs = benchmark
        config = default_workbench.config
        results = harness.compare_training(suite, seeds=20, jobs=jobs)
        adaptive = crossings(results[ADAPTIVE_CB], 65.0, config.m)
        original = crossings(results[ORIGINAL_CB], 65.0, config.m)
        assert sum(1 for a, o in zip(adaptive, original) if a < o) >= 15

    def test_strategy_ordering(self, default_workbench, benchmark):
        harness, suite, jobs = benchmark
        config = default_workbench.config
        results = harness.compare(suite, [TRAINED_LISTS, RANKED_AVERAGE, RANDOM_SEQUENCE], seeds=20, jobs=jobs)
        medians = {s: float(np.median(crossings(reports, 65.0, config.m))) for s, reports in results.items()}
        assert medians[TRAINED_LISTS] < medians[RANKED_AVERAGE] < medians[RANDOM_SEQUENCE]
