import itertools
import math
import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kerneltune.space import (
    GANG_VALUES,
    KERNELS,
    VECTOR_VALUES,
    ParamSpace,
    ParamSpec,
    SpaceError,
    encode,
    encode_many,
    enumerate_all,
    kernel_space,
    sample_random,
    space_from_dict,
    space_size,
    space_to_dict,
    split,
)


def small_space(*value_lists, device_feature=False):
    return ParamSpace(tuple(ParamSpec(f"p{i}", v) for i, v in enumerate(value_lists)), device_feature)


@st.composite
def spaces(draw, max_params=4, max_values=6):
    k = draw(st.integers(1, max_params))
    specs = []
    for i in range(k):
        vals = draw(st.lists(st.integers(1, 1000), min_size=1, max_size=max_values, unique=True))
        specs.append(ParamSpec(f"p{i}", sorted(vals)))
    return ParamSpace(tuple(specs))


# --- grids ---------------------------------------------------------------

def test_grid_values():
    assert GANG_VALUES == tuple(range(100, 1001, 100))
    assert len(GANG_VALUES) == 10
    assert VECTOR_VALUES == tuple(range(32, 385, 32))
    assert len(VECTOR_VALUES) == 12
    assert len(KERNELS) == 7


def test_full_space_size():
    assert space_size(kernel_space()) == 10**7 * 12**7 == 358_318_080_000_000


def test_size_single_spec_and_pair():
    assert space_size(small_space([1, 2, 3, 4, 5])) == 5
    assert space_size(kernel_space(["xi_limiter"])) == 120


def test_size_exact_beyond_float_precision():
    sp = small_space(*[list(range(1, 1001))] * 7)
    assert space_size(sp) == 10**21


# --- validation ----------------------------------------------------------

@pytest.mark.parametrize("values", [[], [3, 2], [1, 1], [0, 1], [-5]])
def test_param_spec_rejects_bad_values(values):
    with pytest.raises(SpaceError):
        ParamSpec("p", values)


def test_space_rejects_duplicate_names_and_empty():
    with pytest.raises(SpaceError):
        ParamSpace((ParamSpec("a", [1]), ParamSpec("a", [2])))
    with pytest.raises(SpaceError):
        ParamSpace(())


# --- sampling ------------------------------------------------------------

def test_sample_zero_and_single_member():
    assert sample_random(kernel_space(), 0, 1) == []
    assert sample_random(small_space([32]), 1, 0) == [(32,)]


def test_sample_whole_small_space():
    sp = kernel_space(["xi_limiter"])
    got = sample_random(sp, 120, 3)
    assert len(got) == 120
    assert set(got) == set(itertools.product(GANG_VALUES, VECTOR_VALUES))


def test_sample_too_many_fails():
    with pytest.raises(SpaceError):
        sample_random(small_space([1, 2], [3]), 3, 0)


def test_sample_deterministic_and_seed_sensitive():
    sp = kernel_space()
    assert sample_random(sp, 50, 7) == sample_random(sp, 50, 7)
    assert sample_random(sp, 50, 7) != sample_random(sp, 50, 8)


def test_sample_marginals_uniform():
    sp = small_space(list(range(1, 11)), [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12],
                     list(range(1, 11)), list(range(1, 11)))
    draws = np.array(sample_random(sp, 10_000, 11))
    counts = np.bincount(draws[:, 0], minlength=11)[1:]
    assert np.all(np.abs(counts / 10_000 - 0.1) <= 0.05)


@settings(max_examples=40, deadline=None)
@given(spaces(), st.integers(0, 2**32 - 1), st.data())
def test_sample_members_distinct(sp, seed, data):
    n = data.draw(st.integers(0, min(space_size(sp), 50)))
    got = sample_random(sp, n, seed)
    assert len(got) == n == len(set(got))
    assert all(sp.contains(c) for c in got)


# --- enumeration ---------------------------------------------------------

def test_enumerate_order():
    assert list(enumerate_all(small_space([1, 2], [3]), 10)) == [(1, 3), (2, 3)]


def test_enumerate_two_kernel_space():
    sp = kernel_space(KERNELS[:2])
    assert sum(1 for _ in enumerate_all(sp, 14_400)) == 14_400


def test_enumerate_cap():
    with pytest.raises(SpaceError):
        enumerate_all(kernel_space(KERNELS[:2]), 14_399)


@settings(max_examples=40, deadline=None)
@given(spaces())
def test_enumerate_count_and_order(sp):
    got = list(enumerate_all(sp, 10**5))
    assert len(got) == space_size(sp)
    idx = [sp.indices(c) for c in got]
    assert idx == sorted(idx)


# --- encoding ------------------------------------------------------------

def test_encode_examples():
    sp = small_space([100, 200], [32, 64])
    assert encode((100, 32), sp).tolist() == [100.0, 32.0]
    spd = sp.with_device_feature()
    assert encode((100, 32), spd, 7500).tolist() == [100.0, 32.0, 7500.0]
    assert encode((100, 32), spd, 513)[-1] == 513.0


def test_encode_mismatch():
    sp = small_space([100], [32])
    with pytest.raises(SpaceError):
        encode((100, 32), sp, 7500)
    with pytest.raises(SpaceError):
        encode((100, 32), sp.with_device_feature())
    with pytest.raises(SpaceError):
        encode((100, 33), sp)
    with pytest.raises(SpaceError):
        encode_many([(100, 32)], sp, 4700)


@settings(max_examples=30, deadline=None)
@given(spaces())
def test_encode_injective(sp):
    configs = list(enumerate_all(sp, 10**5))[:500]
    rows = {tuple(encode(c, sp)) for c in configs}
    assert len(rows) == len(configs)
    np.testing.assert_array_equal(encode_many(configs, sp), np.array([encode(c, sp) for c in configs]))


# --- split ---------------------------------------------------------------

def test_split_three_to_one():
    tr, te = split(list(range(10_000)), 0.75, 0)
    assert (len(tr), len(te)) == (7_500, 2_500)


def test_split_small():
    tr, te = split([1, 2, 3, 4], 0.75, 0)
    assert (len(tr), len(te)) == (3, 1)


def test_split_errors():
    with pytest.raises(SpaceError):
        split([1], 0.75, 0)
    with pytest.raises(SpaceError):
        split([1, 2], 1.0, 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 500), st.floats(0.01, 0.99), st.integers(0, 1000))
def test_split_is_partition(n, frac, seed):
    tr, te = split(list(range(n)), frac, seed)
    assert sorted(tr + te) == list(range(n))
    assert len(tr) == min(max(round(frac * n), 1), n - 1)
    assert split(list(range(n)), frac, seed) == (tr, te)


# --- definition files ----------------------------------------------------

def test_space_dict_round_trip_and_range():
    d = {"params": [{"name": "g", "range": {"start": 100, "stop": 1000, "step": 100}},
                    {"name": "v", "values": [32, 64]}]}
    sp = space_from_dict(d)
    assert sp.specs[0].values == GANG_VALUES
    assert space_from_dict(space_to_dict(sp)) == sp


@pytest.mark.parametrize("bad, field", [
    ({"params": []}, "space.params"),
    ({"params": [{"name": "g"}]}, "space.params[0]"),
    ({"params": [{"name": "g", "values": [1]}, {"name": "v", "values": [2, 1]}]}, "space.params[1]"),
    ({"params": [{"name": "g", "values": ["a"]}]}, "space.params[0].values"),
    ({"params": [{"name": "g", "values": [1]}], "device_feature": "yes"}, "space.device_feature"),
])
def test_space_dict_errors_name_field(bad, field):
    with pytest.raises(SpaceError, match=re.escape(field)):
        space_from_dict(bad)


def test_midpoint():
    assert kernel_space(["rhs"]).midpoint() == (500, 192)
    assert math.prod(len(s) for s in kernel_space().specs) == space_size(kernel_space())
