import pytest

from mtsplab.allocation import Allocation


def test_owner_and_sizes():
    a = Allocation.of([{1, 3}, {2}])
    assert a.owner == {1: 0, 3: 0, 2: 1}
    assert a.sizes == (2, 1)
    assert a.m == 2
    assert Allocation.from_owner(a.owner, 2) == a


def test_moved_is_simultaneous():
    a = Allocation.of([{1, 3}, {2, 4}])
    b = a.moved([(1, 0, 1), (4, 1, 0)])
    assert b[0] == {3, 4} and b[1] == {1, 2}
    assert b.is_partition_of(5)
    with pytest.raises(ValueError):
        a.moved([(2, 0, 1)])


def test_partition_check():
    assert not Allocation.of([{1}, {1, 2}]).is_partition_of(3)
    assert not Allocation.of([{1}]).is_partition_of(3)


def test_json_roundtrip():
    a = Allocation.of([{5, 1}, {2}])
    assert Allocation.from_json(a.to_json()) == a
