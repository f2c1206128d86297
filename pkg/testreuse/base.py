"""
Base classes for the JSON documents read and written by `testreuse`: model files, suite specs,
configuration files and run summaries.
"""

import hashlib
from collections import OrderedDict
from enum import Enum
from json import loads, dumps
from typing import Dict, Iterable, Sequence, Tuple, Union
import re


class JSONArray(list):
    """
    This is a base class for building JSON arrays.
    """

    def __init__(self, *args):
        super().__init__(*args)

    @property
    def data(self):
        # type: ()-> list
        """
        :return: A list of values compatible with JSON serialization.
        """
        l = []
        for v in self:
            if v is None:
                continue
            l.append(_json_value(v))
        return l

    def __str__(self):
        # type: () -> str
        """
        :return: A JSON representation of this array.
        """
        return dumps(self.data)

    def __repr__(self):
        # type: () -> str
        r = '[%s]' % (
            '\n    ' + ',\n    '.join(
                '\n\t'.join(repr(v).split('\n')) if isinstance(v, JSONObject)
                else repr(v)
                for v in self
            ) + '\n'
            if self
            else ''
        )
        cn = self.__class__.__name__.split('.')[-1]
        if cn != 'JSONArray':
            r = '%s(%s)' % (cn, r)
        return r

    def __eq__(self, other):
        # type: (object) -> bool
        return isinstance(other, self.__class__) and self.data == other.data

    def __ne__(self, other):
        # type: (object) -> bool
        return not self == other


class JSONObject:
    """
    This is a base class for building JSON objects.

    Child classes declare `_keys_attributes`, an ordered map of JSON keys to attribute names. The order of this map
    is the order keys are written in.
    """

    _keys_attributes = OrderedDict()  # type: Dict

    def __init__(self):
        # type: () -> None
        """
        In child classes, initialization should accept arguments matching the JSON object's properties, and should
        assign these explicitly to attributes of the same name.
        """
        pass

    @property
    def data(self):
        # type: () -> Dict
        """
        :return:

            An ordered dictionary of the data represented by this object, in formats suitable for
            JSON serialization.
        """
        d = OrderedDict()
        for k, v in self.items():
            d[k] = _json_value(v)
        return d

    @data.setter
    def data(
        self,
        data  # type: Union[str, bytes, Dict]
    ):
        if isinstance(data, bytes):
            data = str(data, 'utf-8')  # type: str
        if isinstance(data, str):
            data = loads(data, object_hook=OrderedDict)  # type: Dict
        for k, v in data.items():
            if v is None:
                continue
            a = self._keys_attributes[k]  # type: str
            setattr(self, a, v)

    def items(self):
        # type: () -> Iterable[Tuple[str, object]]
        """
        Iterates through the key/value pairs of the corresponding JSON object.
        """
        for k, a in self._keys_attributes.items():
            v = getattr(self, a)
            if v is not None:
                yield k, v

    def __str__(self):
        # type: () -> str
        """
        :return: A JSON representation of this object.
        """
        return dumps(self.data)

    def __repr__(self):
        # type: () -> str
        items = tuple(self.items())
        return '%s(%s)' % (
            self.__class__.__name__.split('.')[-1],
            (
                '\n    ' + ',\n    '.join(
                    self._keys_attributes[k] + '=' + re.sub(r'(\r?\n)\s*', r'', repr(v))
                    for k, v in items
                ) + '\n'
                if items
                else ''
            )
        )

    def __eq__(self, other):
        # type: (object) -> bool
        return isinstance(other, self.__class__) and self.data == other.data

    def __ne__(self, other):
        # type: (object) -> bool
        return not self == other

    __hash__ = None


def _json_value(v):
    if isinstance(v, (JSONArray, JSONObject)):
        return v.data
    if isinstance(v, Enum):
        return v.value
    if isinstance(v, dict):
        return OrderedDict((k, _json_value(x)) for k, x in v.items())
    if isinstance(v, Sequence) and not isinstance(v, (str, bytes)):
        return JSONArray(v).data
    return v


def stable_hash(value):
    # type: (object) -> int
    """
    A 64-bit hash of `str(value)` that, unlike `hash`, is the same in every process.
    """
    return int.from_bytes(hashlib.sha1(str(value).encode('utf-8')).digest()[:8], 'little')
