"""
Coverage points, hit vectors and the coverage matrix.

A `Universe` is the ordered set of coverage points of a design. Its order is a pure function of the module
hierarchy: points sort by module path (segment by segment) and then by their index within the module, which is a
depth-first traversal of the hierarchy with sibling modules visited in name order.

Rows and covered sets are read-only `numpy` boolean vectors over a universe. Coverage quantities are computed on
integer counts and only converted to percentages at the end.
"""

import hashlib
from collections import namedtuple
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from testreuse.errors import StructuralError


class CoveragePointId(namedtuple('CoveragePointId', ('hier_path', 'local_index'))):
    """
    :param hier_path: Module-name segments from the top of the design, e.g. `('core', 'alu')`.

    :param local_index: Non-negative index of the point within its module.
    """

    __slots__ = ()

    def __new__(cls, hier_path, local_index):
        # type: (Sequence[str], int) -> CoveragePointId
        if isinstance(hier_path, str):
            hier_path = hier_path.split('.')
        return super().__new__(cls, tuple(hier_path), int(local_index))

    @property
    def module(self):
        # type: () -> str
        return '.'.join(self.hier_path)

    def __str__(self):
        return '%s:%d' % (self.module, self.local_index)


class Universe:
    """
    An ordered, duplicate-free sequence of coverage points.
    """

    def __init__(self, points=()):
        # type: (Iterable[CoveragePointId]) -> None
        """
        :param points: Coverage points in any order; they are sorted into hierarchy order.

        :raises StructuralError: If a point appears twice.
        """
        points = sorted(points)
        for a, b in zip(points, points[1:]):
            if a == b:
                raise StructuralError(error='duplicate_point', description='Coverage point %s appears twice.' % (a,))
        self._points = tuple(points)  # type: Tuple[CoveragePointId, ...]
        self._index = None  # type: Optional[Dict[CoveragePointId, int]]
        digest = hashlib.sha1()
        for p in self._points:
            digest.update(('%s\n' % (p,)).encode('utf-8'))
        self.digest = digest.hexdigest()

    @classmethod
    def union(cls, universes):
        # type: (Iterable[Universe]) -> Universe
        points = set()
        for u in universes:
            points.update(u)
        return cls(points)

    @property
    def index(self):
        # type: () -> Dict[CoveragePointId, int]
        """
        :return: A map of each point to its column.
        """
        if self._index is None:
            self._index = {p: i for i, p in enumerate(self._points)}
        return self._index

    @property
    def modules(self):
        # type: () -> List[str]
        """
        :return: Module paths in traversal order.
        """
        modules = []
        for p in self._points:
            if not modules or modules[-1] != p.module:
                modules.append(p.module)
        return modules

    def __len__(self):
        return len(self._points)

    def __iter__(self):
        # type: () -> Iterator[CoveragePointId]
        return iter(self._points)

    def __getitem__(self, i):
        return self._points[i]

    def __contains__(self, point):
        return point in self.index

    def __eq__(self, other):
        return self is other or (isinstance(other, Universe) and self.digest == other.digest)

    def __ne__(self, other):
        return not self == other

    def __hash__(self):
        return hash(self.digest)

    def __repr__(self):
        return 'Universe(%d points, %d modules)' % (len(self), len(self.modules))

    def percent(self, count):
        # type: (int) -> float
        """
        :return: `count` points as a percentage of the universe; 0.0 for an empty universe.
        """
        if not self._points:
            return 0.0
        return 100.0 * count / len(self._points)


def _frozen(bits):
    bits = np.asarray(bits, dtype=bool)
    if bits.flags.writeable:
        bits = bits.copy()
        bits.flags.writeable = False
    return bits


class CoverageRow:
    """
    The points one test execution hit.
    """

    __slots__ = ('test_id', 'universe', 'bits')

    def __init__(self, test_id, universe, bits):
        # type: (str, Universe, np.ndarray) -> None
        bits = _frozen(bits)
        if bits.shape != (len(universe),):
            raise StructuralError(
                error='universe_mismatch',
                description='Row %r has %d bits for a universe of %d points.' % (test_id, bits.size, len(universe))
            )
        self.test_id = test_id
        self.universe = universe
        self.bits = bits

    @property
    def hits(self):
        # type: () -> int
        return int(np.count_nonzero(self.bits))

    def hit_points(self):
        # type: () -> List[CoveragePointId]
        return [self.universe[i] for i in np.flatnonzero(self.bits)]

    def project(self, universe):
        # type: (Universe) -> CoverageRow
        """
        Re-expresses the row over a universe containing its own. Points the row's universe lacks are unhit.
        """
        if universe == self.universe:
            return self
        bits = np.zeros(len(universe), dtype=bool)
        index = universe.index
        try:
            columns = [index[p] for p in self.universe]
        except KeyError as e:
            raise StructuralError(
                error='universe_mismatch', description='Point %s of row %r is not in the target universe.' % (
                    e.args[0], self.test_id
                )
            )
        bits[columns] = self.bits
        return CoverageRow(self.test_id, universe, bits)

    def __eq__(self, other):
        return (
            isinstance(other, CoverageRow) and self.test_id == other.test_id and self.universe == other.universe and
            np.array_equal(self.bits, other.bits)
        )

    def __ne__(self, other):
        return not self == other

    __hash__ = None

    def __repr__(self):
        return 'CoverageRow(%r, %d/%d)' % (self.test_id, self.hits, len(self.universe))


class CoveredSet:
    """
    The points reached so far in a campaign. Updates produce new sets, so a set only ever grows along a campaign.
    """

    __slots__ = ('universe', 'bits', '_missing', '_count')

    def __init__(self, universe, bits=None):
        # type: (Universe, Optional[np.ndarray]) -> None
        self.universe = universe
        if bits is None:
            bits = np.zeros(len(universe), dtype=bool)
        bits = _frozen(bits)
        if bits.shape != (len(universe),):
            raise StructuralError(
                error='universe_mismatch',
                description='Covered set has %d bits for a universe of %d points.' % (bits.size, len(universe))
            )
        self.bits = bits
        self._missing = None
        self._count = None

    @property
    def count(self):
        # type: () -> int
        if self._count is None:
            self._count = int(np.count_nonzero(self.bits))
        return self._count

    def _check(self, row):
        if row.universe is not self.universe and row.universe != self.universe:
            raise StructuralError(
                error='universe_mismatch',
                description='Row %r is not defined over the universe of the covered set.' % row.test_id
            )

    def total_coverage(self):
        # type: () -> float
        return self.universe.percent(self.count)

    def new_points(self, row):
        # type: (CoverageRow) -> int
        """
        :return: The number of points `row` hits that are not covered yet.
        """
        self._check(row)
        if self._missing is None:
            self._missing = ~self.bits
        return int(np.count_nonzero(row.bits & self._missing))

    def incremental_coverage(self, row):
        # type: (CoverageRow) -> float
        return self.universe.percent(self.new_points(row))

    def merge(self, row):
        # type: (CoverageRow) -> CoveredSet
        self._check(row)
        if self._missing is not None and not np.any(row.bits & self._missing):
            return self
        return CoveredSet(self.universe, self.bits | row.bits)

    def __contains__(self, point):
        return bool(self.bits[self.universe.index[point]])

    def __eq__(self, other):
        return isinstance(other, CoveredSet) and self.universe == other.universe and \
            np.array_equal(self.bits, other.bits)

    def __ne__(self, other):
        return not self == other

    __hash__ = None

    def __repr__(self):
        return 'CoveredSet(%d/%d)' % (self.count, len(self.universe))


class CoverageMatrix:
    """
    The binary test-by-point matrix: entry (i, j) is set when test i hits point j. Rows keep their ingestion order.
    """

    def __init__(self, universe, rows):
        # type: (Universe, Sequence[CoverageRow]) -> None
        self.universe = universe
        self.rows = tuple(rows)
        self._positions = {}
        for i, row in enumerate(self.rows):
            if row.universe != universe:
                raise StructuralError(
                    error='universe_mismatch', description='Row %r is not over the matrix universe.' % row.test_id
                )
            if row.test_id in self._positions:
                raise StructuralError(
                    error='duplicate_test', description='Test %r appears twice in the matrix.' % row.test_id
                )
            self._positions[row.test_id] = i
        if self.rows:
            self.bits = np.vstack([row.bits for row in self.rows])
        else:
            self.bits = np.zeros((0, len(universe)), dtype=bool)
        self.bits.flags.writeable = False

    @property
    def test_ids(self):
        # type: () -> List[str]
        return [row.test_id for row in self.rows]

    @property
    def shape(self):
        # type: () -> Tuple[int, int]
        return self.bits.shape

    def position(self, test_id):
        # type: (str) -> int
        try:
            return self._positions[test_id]
        except KeyError:
            raise StructuralError(error='unknown_test', description='Test %r is not in the matrix.' % test_id)

    def row(self, test_id):
        # type: (str) -> CoverageRow
        return self.rows[self.position(test_id)]

    def union(self, test_ids=None):
        # type: (Optional[Iterable[str]]) -> np.ndarray
        """
        :return: The points hit by any of `test_ids`, or by any test when `test_ids` is `None`.
        """
        if test_ids is None:
            return self.bits.any(axis=0)
        positions = [self.position(t) for t in test_ids]
        if not positions:
            return np.zeros(len(self.universe), dtype=bool)
        return self.bits[positions].any(axis=0)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        # type: () -> Iterator[CoverageRow]
        return iter(self.rows)

    def __repr__(self):
        return 'CoverageMatrix(%d tests x %d points)' % self.shape
