from pathlib import Path

import pytest

from QFP.Tables import (
    Table,
    Tables,
    format_comment,
    parse_comment,
    read_table_from_csv,
    write_table_to_csv,
)


RESOURCES = Path(__file__).parent / ".." / "resources"

COLUMNS = ["n", "expected_rate", "sampled_counts"]

DATA_DICT = [
    {"n": 3, "expected_rate": 1.5, "sampled_counts": 2},
    {"n": 4, "expected_rate": 0.5, "sampled_counts": 0},
]

DATA_LIST = [[3, 1.5, 2], [4, 0.5, 0]]

DATA_FIXTURE = {
    "dict": (DATA_DICT, None),
    "list": (DATA_LIST, COLUMNS),
}


@pytest.fixture(params=DATA_FIXTURE)
def table(request):
    data, columns = DATA_FIXTURE[request.param]
    return Table(data, columns)


def test_table_columns(table):
    assert table.columns == COLUMNS
    assert len(table) == 2


def test_table_get_column(table):
    assert table.get_column("n") == [3, 4]
    with pytest.raises(KeyError):
        table.get_column("missing")


def test_table_list_rows_need_columns():
    with pytest.raises(ValueError):
        Table(DATA_LIST)


def test_table_append_invalid_rows(table):
    with pytest.raises(ValueError):
        table.append_row({"unknown": 1})
    with pytest.raises(ValueError):
        table.append_row([1, 2])
    with pytest.raises(TypeError):
        table.append_row(5)


def test_comment_round_trip():
    line = format_comment({"config_hash": "abc123", "seed": 2021})
    assert line == "# config_hash=abc123 seed=2021"
    assert parse_comment(line) == {"config_hash": "abc123", "seed": "2021"}


def test_comment_ignores_plain_words():
    assert parse_comment("# written by qfp seed=1") == {"seed": "1"}


def test_write_and_read(tmp_path, table):
    path = tmp_path / "table.csv"
    write_table_to_csv(table, path, {"seed": 5})
    assert path.read_text().splitlines()[:2] == ["# seed=5", "n,expected_rate,sampled_counts"]

    result, metadata = read_table_from_csv(path)
    assert metadata == {"seed": "5"}
    assert result.columns == COLUMNS
    assert result.get_column("expected_rate") == ["1.5", "0.5"]


def test_write_without_metadata(tmp_path, table):
    path = tmp_path / "table.csv"
    write_table_to_csv(table, path)
    assert path.read_text().startswith("n,")


def test_read_fixture():
    table, metadata = read_table_from_csv(RESOURCES / "basis_counts.csv")
    assert metadata["config_hash"] == "fixture"
    assert table.get_column("n") == ["10", "14", "18"]


def test_keywords(tmp_path, table):
    library = Tables()
    path = tmp_path / "keyword.csv"
    library.write_table(table, path, seed=1)
    result, metadata = library.read_table(path)
    assert len(result) == 2
    assert metadata == {"seed": "1"}
