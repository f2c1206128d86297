import json
from collections import OrderedDict

import pytest

from testreuse.data import (
    Config, ListEntry, MinimizeResult, ModelParams, SpeedupResult, SuiteSpec, Test, TestKind, TestListModel,
    TrainedList, level_key
)
from testreuse.errors import ConfigError, ParseError, StructuralError, SuiteSpecError, TestReuseError


class TestLevelKey:

    def test_formats(self):
        assert level_key(55.0) == '55'
        assert level_key(62.5) == '62.5'


class TestTestRecord:

    def test_json(self):
        """A mutant carries its parent and index; optional fields left unset are not written."""
        test = Test(test_id='t1~2', origin='p0', parent='t1', mutant_index=2)
        assert test.is_mutant
        assert test.data['parent'] == 't1'
        assert test.data['kind'] == 'coverage'
        assert not Test(test_id='t1').is_mutant
        assert 'parent' not in Test(test_id='t1').data


class TestTrainedList:

    def test_validate_accepts_distribution(self):
        TrainedList(context=55.0, entries=[('a', 0.25), ('b', 0.75)]).validate()
        TrainedList(context=55.0).validate()

    def test_validate_rejects_mass(self):
        with pytest.raises(StructuralError) as e:
            TrainedList(context=55.0, entries=[('a', 0.25), ('b', 0.5)]).validate()
        assert e.value.error == 'probability_mass'

    def test_validate_rejects_zero_probability(self):
        with pytest.raises(StructuralError):
            TrainedList(entries=[('a', 1.0), ('b', 0.0)]).validate()

    def test_validate_rejects_duplicates(self):
        with pytest.raises(StructuralError) as e:
            TrainedList(entries=[('a', 0.5), ('a', 0.5)]).validate()
        assert e.value.error == 'duplicate_test'

    def test_data_round_trip(self):
        trained = TrainedList(context=60.0, kind=TestKind.COVERAGE, entries=[('a', 1.0)])
        assert TrainedList(str(trained)) == trained
        assert isinstance(TrainedList(str(trained)).entries[0], ListEntry)


class TestTestListModel:

    def test_overlapping_lists(self):
        """A test listed under two contexts is rejected."""
        model = TestListModel(
            ModelParams(),
            coverage_lists={
                55.0: TrainedList(context=55.0, entries=[('a', 1.0)]),
                60.0: TrainedList(context=60.0, entries=[('b', 0.5), ('a', 0.5)])
            }
        )
        with pytest.raises(StructuralError) as e:
            model.validate()
        assert e.value.error == 'overlapping_lists'

    def test_contexts_ascending(self):
        model = TestListModel(ModelParams(), coverage_lists={70.0: TrainedList(), 55.0: TrainedList()})
        assert model.contexts == [55.0, 70.0]


class TestMinimizeResult:

    def test_reduction_rate(self):
        result = MinimizeResult(selected=['t3', 't1'], corpus_size=8)
        assert result.selected == ['t1', 't3']
        assert result.objective == 2
        assert result.reduction_rate == pytest.approx(75.0)
        assert result.data['objective'] == 2

    def test_empty_corpus(self):
        assert MinimizeResult().reduction_rate == 0.0


class TestSpeedupResult:

    def test_json_keys(self):
        result = SpeedupResult(threshold=65.0, ratio=5.0, tests_ref=100, tests_base=500)
        assert list(result.data) == ['threshold', 'ratio', 'testsRef', 'testsBase', 'censored']


class TestConfig:

    def test_defaults(self):
        config = Config().validate()
        assert (config.k, config.gamma, config.epsilon, config.n, config.f) == (100, 3, 0.2, 10000, 0.1)
        assert config.levels == [55.0, 60.0, 65.0, 70.0]
        assert config.theta == OrderedDict()

    def test_presets(self):
        branch = Config.branch_preset().validate()
        assert branch.theta[65.0] == 0.90
        condition = Config.condition_preset().validate()
        assert condition.levels == [45.0, 50.0, 55.0, 60.0, 65.0]
        assert condition.theta[45.0] == 14.84

    def test_params_keep_configured_levels(self):
        config = Config(levels=[55.0, 60.0], theta={'55': 1.9, '70': 1.26})
        assert config.params.theta == OrderedDict([(55.0, 1.9)])

    def test_json(self):
        """Thresholds are keyed by formatted level in JSON and by float in memory."""
        config = Config('{"k": 50, "theta": {"55": 1.9}, "levels": [55, 60]}')
        assert config.k == 50
        assert config.theta == OrderedDict([(55.0, 1.9)])
        assert config.levels == [55.0, 60.0]
        assert json.loads(str(config))['theta'] == {'55': 1.9}

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as e:
            Config('{"kk": 1}')
        assert e.value.error == 'unknown_key'

    @pytest.mark.parametrize('settings', [
        dict(k=0),
        dict(gamma=0),
        dict(epsilon=1.5),
        dict(n=-1),
        dict(f=1.0),
        dict(levels=[60.0, 55.0]),
        dict(levels=[]),
        dict(jobs=0)
    ])
    def test_invalid_values(self, settings):
        with pytest.raises(ConfigError):
            Config(**settings).validate()

    def test_update_ignores_none(self):
        config = Config().update(k=20, gamma=None)
        assert (config.k, config.gamma) == (20, 3)
        with pytest.raises(ConfigError):
            Config().update(colour='blue')

    def test_from_file(self, tmp_path):
        path = tmp_path / 'config.json'
        path.write_text('{"m": 500, "seed": 3}', encoding='utf-8')
        config = Config.from_file(str(path))
        assert (config.m, config.seed) == (500, 3)
        with pytest.raises(ConfigError):
            Config.from_file(str(tmp_path / 'missing.json'))
        path.write_text('{"m": ', encoding='utf-8')
        with pytest.raises(ConfigError) as e:
            Config.from_file(str(path))
        assert e.value.error == 'invalid_json'


class TestSuiteSpec:

    def test_defaults_validate(self):
        spec = SuiteSpec().validate()
        assert (spec.universe_size, spec.trainers, spec.tests_per_trainer) == (2000, 3, 700)
        assert spec.similarity == 0.8

    def test_json_keys(self):
        spec = SuiteSpec('{"universeSize": 100, "tierShares": [0.25, 0.25, 0.25, 0.25]}')
        assert spec.universe_size == 100
        assert SuiteSpec(str(spec)) == spec

    def test_unknown_key(self):
        with pytest.raises(SuiteSpecError):
            SuiteSpec('{"points": 100}')

    @pytest.mark.parametrize('settings', [
        dict(tests_per_trainer=10, bases_per_trainer=20),
        dict(tier_shares=(0.5, 0.5, 0.5, 0.0)),
        dict(universe_size=100, tier_shares=(0.5, 0.3, 0.2, 0.0)),
        dict(similarity=1.5),
        dict(module_size=0)
    ])
    def test_inconsistent(self, settings):
        with pytest.raises(SuiteSpecError):
            SuiteSpec(**settings).validate()

    def test_suite_spec_error_is_config_error(self):
        assert issubclass(SuiteSpecError, ConfigError)


class TestErrors:

    def test_message(self):
        error = ParseError(error='unknown_line', description='Unknown directive.', line=3)
        assert str(error) == 'line 3: Unknown directive.'
        assert isinstance(error, TestReuseError)
        assert error.data == OrderedDict([
            ('error', 'unknown_line'), ('error_description', 'Unknown directive.'), ('line', 3)
        ])

    def test_items_skip_unset_keys(self):
        error = StructuralError(error='no_arms', description='Empty.')
        assert list(error.items()) == [('error', 'no_arms'), ('error_description', 'Empty.')]
        assert not hasattr(error, 'keys')

    def test_from_json(self):
        error = StructuralError('{"error": "no_arms", "error_description": "Empty."}')
        assert error.error == 'no_arms'
        assert str(error) == 'Empty.'
