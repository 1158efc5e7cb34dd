import pytest
from collections import OrderedDict
from QFP.core import types


dicts = (
    (dict(), True),
    (dict(n=34), True),
    (OrderedDict(), True),
    (OrderedDict(n=34), True),
    (list(), False),
    (list("value"), False),
    (object(), False),
)

lists = (
    ([1, 2], True),
    ((1, 2), True),
    (range(3), True),
    ("value", False),
    (b"value", False),
    ({"n": 1}, False),
    (3, False),
)

numbers = (
    (1, True),
    (0.81, True),
    (True, False),
    ("1", False),
    (None, False),
)


@pytest.mark.parametrize("obj,result", dicts)
def test_is_dict_like(obj, result):
    assert types.is_dict_like(obj) == result


@pytest.mark.parametrize("obj,result", lists)
def test_is_list_like(obj, result):
    assert types.is_list_like(obj) == result


@pytest.mark.parametrize("obj,result", numbers)
def test_is_number(obj, result):
    assert types.is_number(obj) == result
