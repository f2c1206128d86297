from collections import OrderedDict
from typing import Dict, Optional, Union

from testreuse.base import JSONObject


class TestReuseError(JSONObject, Exception):

    __test__ = False

    def __hash__(self):
        return hash((self.error, self.description, self.line))

    _keys_attributes = OrderedDict([
        ('error', 'error'),
        ('error_description', 'description'),
        ('line', 'line')
    ])

    def __init__(
        self,
        data: Optional[Union[str, bytes, Dict]]=None,
        error: Optional[str]=None,
        description: Optional[str]=None,
        line: Optional[int]=None
    ):
        self.error = error
        self.description = description
        self.line = line
        if data:
            self.data = data
        Exception.__init__(self, str(self))

    def __str__(self):
        if self.line is not None:
            return 'line %d: %s' % (self.line, self.description or self.error)
        return self.description or self.error or self.__class__.__name__


class ParseError(TestReuseError):

    pass


class StructuralError(TestReuseError):

    pass


class ModelFormatError(TestReuseError):

    pass


class ConfigError(TestReuseError):

    pass


class SuiteSpecError(ConfigError):

    pass


class FuzzerError(TestReuseError):

    pass
