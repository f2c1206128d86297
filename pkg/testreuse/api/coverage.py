import logging
import os
import re
import zipfile
from typing import Iterable, List, Optional, Sequence

import numpy as np

import testreuse as testreuse_
from testreuse.coverage import CoverageMatrix, CoveragePointId, CoverageRow, CoveredSet, Universe
from testreuse.errors import ParseError, StructuralError

logger = logging.getLogger(__name__)

RCDB_SUFFIX = '.rcdb'

_INDEX = re.compile(r'[0-9]+\Z')


def decode_text(data, name):
    # type: (bytes, str) -> str
    """
    :raises ParseError: When `data` is not UTF-8, with the line of the first bad byte.
    """
    try:
        return data.decode('utf-8')
    except UnicodeDecodeError as e:
        raise ParseError(
            error='undecodable', description='%s: not UTF-8 text at byte %d.' % (name, e.start),
            line=data.count(b'\n', 0, e.start) + 1
        )


class Coverage:
    """
    Reads coverage databases and computes coverage quantities.

    Coverage databases use the RCDB text format, one file per (test, processor) execution::

        # comment
        module core
        point 0 1
        point 1 0
        module core.alu
        point 0 1

    `module <dot.separated.path>` opens a module scope; `point <local_index> <0|1>` declares a coverage point of the
    current module and whether the execution hit it.
    """

    def __init__(self, workbench):
        # type: (testreuse_.Workbench) -> None
        self.workbench = workbench

    def parse_coverage_db(
        self,
        text,  # type: str
        test_id=''  # type: str
    ):
        # type: (...) -> CoverageRow
        """
        Parses one RCDB document.

        :param text:

            The document.

        :param test_id:

            The id of the test whose execution the document records.

        :return:

            The test's row. Its universe is the set of points the document declares, in hierarchy order.

        :raises ParseError: On a malformed or unknown line.

        :raises StructuralError: When a point is declared twice.
        """
        points = []  # type: List[CoveragePointId]
        hits = []  # type: List[bool]
        lines = {}
        module = None
        for number, line in enumerate(text.split('\n'), 1):
            fields = line.split()
            if not fields or fields[0].startswith('#'):
                continue
            directive = fields[0]
            if directive == 'module':
                if len(fields) != 2:
                    raise ParseError(error='malformed_module', description='Expected "module <path>".', line=number)
                segments = fields[1].split('.')
                if not all(segments):
                    raise ParseError(
                        error='malformed_module', description='Invalid module path %r.' % fields[1], line=number
                    )
                module = tuple(segments)
            elif directive == 'point':
                if module is None:
                    raise ParseError(
                        error='point_outside_module', description='Point declared before any module.', line=number
                    )
                if len(fields) != 3 or not _INDEX.match(fields[1]) or fields[2] not in ('0', '1'):
                    raise ParseError(
                        error='malformed_point', description='Expected "point <local_index> <0|1>".', line=number
                    )
                point = CoveragePointId(module, int(fields[1]))
                if point in lines:
                    raise StructuralError(
                        error='duplicate_point',
                        description='Point %s already declared on line %d.' % (point, lines[point]),
                        line=number
                    )
                lines[point] = number
                points.append(point)
                hits.append(fields[2] == '1')
            else:
                raise ParseError(error='unknown_line', description='Unknown directive %r.' % directive, line=number)
        universe = Universe(points)
        bits = np.zeros(len(universe), dtype=bool)
        index = universe.index
        for point, hit in zip(points, hits):
            bits[index[point]] = hit
        return CoverageRow(test_id, universe, bits)

    def format_coverage_db(self, row, comment=None):
        # type: (CoverageRow, Optional[str]) -> str
        """
        Writes `row` as an RCDB document with module scopes in hierarchy order.
        """
        lines = []
        if comment:
            lines.extend('# %s' % c for c in comment.split('\n'))
        module = None
        for point, hit in zip(row.universe, row.bits):
            if point.module != module:
                module = point.module
                lines.append('module %s' % module)
            lines.append('point %d %d' % (point.local_index, 1 if hit else 0))
        return '\n'.join(lines) + '\n'

    def load_coverage_dir(self, path):
        # type: (str) -> List[CoverageRow]
        """
        Parses every `*.rcdb` file of a directory, in file-name order. The test id of a row is its file name without
        the suffix.
        """
        rows = []
        for name in sorted(os.listdir(path)):
            if not name.endswith(RCDB_SUFFIX):
                continue
            with open(os.path.join(path, name), 'rb') as f:
                text = decode_text(f.read(), name)
            test_id = name[:-len(RCDB_SUFFIX)]
            try:
                rows.append(self.parse_coverage_db(text, test_id=test_id))
            except (ParseError, StructuralError) as e:
                e.description = '%s: %s' % (name, e.description)
                raise
        logger.info('Parsed %d coverage databases from %s', len(rows), path)
        return rows

    def build_matrix(self, rows):
        # type: (Sequence[CoverageRow]) -> CoverageMatrix
        """
        Builds the coverage matrix of `rows`, in their order. Rows over differing universes are re-expressed over the
        union of the universes, with the points a row's universe lacks unhit.

        :raises StructuralError: When a test id appears twice.
        """
        universes = []
        for row in rows:
            if not any(u == row.universe for u in universes):
                universes.append(row.universe)
        if not universes:
            return CoverageMatrix(Universe(), [])
        if len(universes) == 1:
            universe = universes[0]
        else:
            universe = Universe.union(universes)
            logger.debug('Unified %d distinct universes into %d points', len(universes), len(universe))
        return CoverageMatrix(universe, [row.project(universe) for row in rows])

    def total_coverage(self, covered, universe=None):
        # type: (CoveredSet, Optional[Universe]) -> float
        """
        :return: 100 * |covered| / |universe|, or 0.0 for an empty universe.
        """
        if universe is not None and universe != covered.universe:
            raise StructuralError(error='universe_mismatch', description='Covered set is over another universe.')
        return covered.total_coverage()

    def incremental_coverage(self, row, covered):
        # type: (CoverageRow, CoveredSet) -> float
        """
        :return: 100 * |row \\ covered| / |universe|. `covered` is not modified.
        """
        return covered.incremental_coverage(row)

    def merge_covered(self, covered, row):
        # type: (CoveredSet, CoverageRow) -> CoveredSet
        return covered.merge(row)

    def standalone_coverage(self, row):
        # type: (CoverageRow) -> float
        """
        :return: The total coverage `row` reaches by itself.
        """
        return row.universe.percent(row.hits)

    def save_matrix(self, matrix, path):
        # type: (CoverageMatrix, str) -> None
        np.savez_compressed(
            path,
            bits=np.asarray(matrix.bits),
            test_ids=np.array(matrix.test_ids, dtype=str),
            modules=np.array([p.module for p in matrix.universe], dtype=str),
            local_indices=np.array([p.local_index for p in matrix.universe], dtype=np.int64)
        )

    def load_matrix(self, path):
        # type: (str) -> CoverageMatrix
        try:
            with np.load(path, allow_pickle=False) as archive:
                bits = np.asarray(archive['bits'], dtype=bool)
                test_ids = [str(t) for t in archive['test_ids']]
                points = [
                    CoveragePointId(str(m), int(i)) for m, i in zip(archive['modules'], archive['local_indices'])
                ]
        except (KeyError, ValueError, zipfile.BadZipFile) as e:
            raise ParseError(error='malformed_matrix', description='Matrix %s is unreadable: %s' % (path, e))
        universe = Universe(points)
        if [p for p in universe] != points:
            raise StructuralError(error='unordered_universe', description='Matrix %s is not in hierarchy order.' % path)
        return CoverageMatrix(universe, [CoverageRow(t, universe, b) for t, b in zip(test_ids, bits)])

    def covered_from_rows(self, universe, rows):
        # type: (Universe, Iterable[CoverageRow]) -> CoveredSet
        covered = CoveredSet(universe)
        for row in rows:
            covered = covered.merge(row)
        return covered
