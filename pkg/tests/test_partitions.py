from fractions import Fraction as F

import pytest

from conftest import hyp, uniform_tabular
from omnikit.entropy import FiniteLinearSource
from omnikit.partitions import (FractionalPartition, Partition, add_channel, dpi_check, enumerate_partitions,
                                fractional_info, meet, mmi, partition_info, shearer_bounds)


def bell(n):
    # Bell triangle, independent of the restricted-growth enumeration
    row = [1]
    for _ in range(n - 1):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[-1]


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_enumeration_counts_each_partition_once(n):
    parts = list(enumerate_partitions(range(n)))
    assert len(parts) == bell(n) - 1
    assert len(set(parts)) == len(parts)
    assert all(len(P) >= 2 and P.ground == frozenset(range(n)) for P in parts)


def test_partition_canonical_and_meet():
    P = Partition([[3, 2], [1]])
    assert P.blocks == ((1,), (2, 3))
    assert P == Partition([[1], [2, 3]])
    Q = Partition([[1, 2], [3]])
    assert meet(P, Q) == Partition.singletons([1, 2, 3])
    assert Partition.singletons([1, 2, 3]).finer_eq(P)
    with pytest.raises(ValueError):
        Partition([[1, 2], [2]])


def test_mmi_xor_triple():
    lin = FiniteLinearSource(2, 2, {1: [[1, 0]], 2: [[0, 1]], 3: [[1, 1]]})
    m = mmi(lin, [1, 2, 3])
    assert m.value == F(1, 2)
    assert m.fundamental == Partition.singletons([1, 2, 3])
    assert m.optimal == [Partition.singletons([1, 2, 3])]


def test_mmi_fundamental_is_finest_optimal():
    # 1-2 share two bits, 2-3 share one: the finest optimum splits {1,2} from {3}
    h = hyp([("a", [1, 2]), ("b", [1, 2]), ("c", [2, 3])])
    m = mmi(h, [1, 2, 3])
    assert m.value == 1
    assert m.fundamental == Partition([[1, 2], [3]])


def test_partition_info_and_conditioning():
    h = hyp([("a", [1, 2, 4]), ("b", [2, 3, 4])])
    assert partition_info(h, Partition.singletons([1, 2, 4])) == F(3, 2)
    # given Z_3 edge b is known, leaving edge a shared by all three
    assert partition_info(h, Partition.singletons([1, 2, 4]), W=[3]) == 1
    assert mmi(h, [1, 2, 4], [3]).value == 1
    with pytest.raises(ValueError):
        partition_info(h, Partition.singletons([1, 2]), W=[2])


def test_co_partition_gives_partition_info():
    h = hyp([("a", [1, 2]), ("b", [2, 3]), ("c", [1, 3]), ("d", [1, 2, 3])])
    for P in enumerate_partitions([1, 2, 3]):
        assert fractional_info(h, FractionalPartition.co_partition(P)) == partition_info(h, P)


def test_fractional_partition_validation_and_shape():
    with pytest.raises(ValueError, match="covered"):
        FractionalPartition([1, 2, 3], {frozenset([1]): 1, frozenset([2]): 1})
    with pytest.raises(ValueError, match="full ground set"):
        FractionalPartition([1, 2], {frozenset([1, 2]): 1})
    lam = FractionalPartition.co_partition(Partition.singletons([1, 2, 3]))
    assert lam.shape() == ("co-partition", Partition.singletons([1, 2, 3]))
    assert lam.total() == F(3, 2)
    ind = FractionalPartition.indicator(Partition([[1, 2], [3]]))
    assert ind.shape() == ("partition", Partition([[1, 2], [3]]))
    with pytest.raises(ValueError, match="support family"):
        FractionalPartition([1, 2], {frozenset([1]): 1, frozenset([2]): 1}, support=[frozenset([1])])


def test_shearer_sandwich_on_xor():
    lin = FiniteLinearSource(2, 2, {1: [[1, 0]], 2: [[0, 1]], 3: [[1, 1]]})
    lam = FractionalPartition.co_partition(Partition.singletons([1, 2, 3]))
    lo, v, hi = shearer_bounds(lin, lam)
    assert (lo, v, hi) == (F(1, 2), F(1, 2), F(3, 2))


def test_dpi_with_identity_and_noisy_channels():
    src = uniform_tabular({1: lambda x: x[0], 2: lambda x: x[0] ^ x[1], 3: lambda x: x[1]}, 2)
    lam = FractionalPartition.co_partition(Partition.singletons([1, 2, 3]))
    same = add_channel(src, [1], lambda k: {k[0]: 1}, 9)
    rep = dpi_check(same, lam, 1, 9)
    assert rep.ok and rep.delta == 0
    noisy = add_channel(src, [1], lambda k: {k[0]: F(3, 4), 1 - k[0]: F(1, 4)}, 9)
    rep = dpi_check(noisy, lam, 1, 9)
    assert rep.ok
    assert rep.dpi1[0] >= rep.dpi1[1] - noisy.tol
