import csv
import logging
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

from robot.api.deco import keyword

from QFP.core.types import is_dict_like, is_list_like


COMMENT = "#"


def if_none(value, default):
    """Return default if value is None."""
    return value if value is not None else default


def format_comment(metadata: Mapping[str, Any]) -> str:
    """Comment line of space-separated key=value items."""
    items = " ".join(f"{key}={value}" for key, value in metadata.items())
    return f"{COMMENT} {items}"


def parse_comment(line: str) -> Dict[str, str]:
    """Key=value items of a comment line, other words are ignored."""
    metadata = {}
    for word in line.lstrip(COMMENT).split():
        key, sep, value = word.partition("=")
        if sep:
            metadata[key] = value
    return metadata


class Table:
    """Container for rows of named columns.

    Rows can be given as dictionaries, or as lists or tuples
    in the order of `columns`.

    :param rows:     values for table
    :param columns:  names for columns, deduced from the first
                     dictionary row if not given
    """

    def __init__(self, rows: Optional[Sequence] = None, columns: Optional[Sequence[str]] = None):
        rows = list(if_none(rows, []))
        if columns is None:
            if rows and is_dict_like(rows[0]):
                columns = list(rows[0].keys())
            elif rows:
                raise ValueError("Columns required for list-like rows")
        self._columns = list(if_none(columns, []))
        self._rows: List[Dict[str, Any]] = []
        for row in rows:
            self.append_row(row)

    def __repr__(self):
        return "Table(columns={}, rows={})".format(self._columns, len(self))

    def __len__(self):
        return len(self._rows)

    def __iter__(self) -> Iterator[Dict[str, Any]]:
        return self.iter_dicts()

    def __eq__(self, other):
        if not isinstance(other, Table):
            return False
        return self._columns == other._columns and self._rows == other._rows

    @property
    def columns(self) -> List[str]:
        return list(self._columns)

    def append_row(self, row) -> None:
        if is_dict_like(row):
            unknown = set(row) - set(self._columns)
            if unknown:
                raise ValueError(f"Unknown column(s): {sorted(unknown)}")
            values = {column: row.get(column) for column in self._columns}
        elif is_list_like(row):
            if len(row) != len(self._columns):
                raise ValueError("Row length does not match columns")
            values = dict(zip(self._columns, row))
        else:
            raise TypeError("Not a valid row format")
        self._rows.append(values)

    def iter_dicts(self) -> Iterator[Dict[str, Any]]:
        for row in self._rows:
            yield dict(row)

    def get_column(self, column: str) -> List[Any]:
        if column not in self._columns:
            raise KeyError(f"Unknown column: {column}")
        return [row[column] for row in self._rows]


def read_table_from_csv(path, dialect: str = "excel") -> Tuple[Table, Dict[str, str]]:
    """Read a CSV file with a header row and optional comment lines.

    Comment lines start with ``#`` and their key=value items are
    returned as metadata.

    :param path:    path to CSV file
    :param dialect: format of CSV file
    """
    metadata: Dict[str, str] = {}

    def rows(fd):
        for line in fd:
            if line.startswith(COMMENT):
                metadata.update(parse_comment(line))
            elif line.strip():
                yield line

    with open(path, newline="") as fd:
        reader = csv.DictReader(rows(fd), dialect=dialect)
        data = list(reader)
        columns = reader.fieldnames or []

    return Table(data, columns), metadata


def write_table_to_csv(
    table: Table,
    path,
    metadata: Optional[Mapping[str, Any]] = None,
    dialect: str = "excel",
) -> None:
    """Write a table as a CSV file, preceded by a metadata comment line.

    :param table:    table to write
    :param path:     path to write to
    :param metadata: items for the comment line, omitted if empty
    :param dialect:  the format of output CSV
    """
    with open(path, mode="w", newline="") as fd:
        if metadata:
            fd.write(format_comment(metadata) + "\n")
        writer = csv.DictWriter(
            fd, fieldnames=table.columns, dialect=dialect, lineterminator="\n"
        )
        writer.writeheader()
        for row in table.iter_dicts():
            writer.writerow(row)


class Tables:
    """`Tables` is a library for the CSV tables exchanged between the
    simulation steps. Every file starts with a comment line recording
    the configuration hash and seed it was produced with.
    """

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    @keyword("Read table from CSV")
    def read_table(self, path):
        """Read a CSV file, returns the table and its metadata."""
        self.logger.info("Reading table from %s", path)
        return read_table_from_csv(path)

    @keyword("Write table to CSV")
    def write_table(self, table: Table, path, **metadata):
        """Write a table, keyword arguments go to the comment line."""
        self.logger.info("Writing %d rows to %s", len(table), path)
        write_table_to_csv(table, path, metadata)
