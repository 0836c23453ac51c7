import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from valuedyn.core import BcmParams, DataError, EgoNetwork, ParameterError
from valuedyn.dynamics import bcm_pair_update
from valuedyn.io import SynthSpec, generate_synthetic
from valuedyn.labeling import (
    CSV_COLUMNS,
    build_dataset,
    label_sigma,
    label_sigma_oracle,
    load_dataset,
    save_dataset,
    split_dataset,
)

unit = st.floats(0, 1)


@pytest.mark.parametrize("v_next,expected", [(0.58, 0.21), (0.50, 0.10), (0.60, 0.21)])
def test_label_examples(v_next, expected):
    assert label_sigma(0.5, 0.7, v_next, 0.4, 0.01) == pytest.approx(expected, abs=1e-12)


def test_label_caps_at_one():
    assert label_sigma(0.0, 1.0, 0.4, 0.4, 0.01) == 1.0


def test_label_rejects_nonpositive_delta():
    with pytest.raises(ParameterError):
        label_sigma(0.5, 0.7, 0.58, 0.4, 0.0)


def test_oracle_examples():
    assert 0.2 <= label_sigma_oracle(0.5, 0.7, 0.58, 0.4) <= 0.21
    assert label_sigma_oracle(0.5, 0.7, 0.50, 0.4) == pytest.approx(0.10, abs=1e-3)
    # zero difference: every threshold fits, the grid median is returned
    assert label_sigma_oracle(0.5, 0.5, 0.5, 0.4) == pytest.approx(0.5)
    assert label_sigma(0.5, 0.5, 0.5, 0.4, 0.01) == pytest.approx(0.01)


def _brute(vi, vj, vn, mu, delta):
    # separate oracle: explicit branch errors, no grid
    on = (vi + mu * (vj - vi) - vn) ** 2
    off = (vi - vn) ** 2
    return min(abs(vj - vi) + delta, 1.0) if on <= off else abs(vj - vi) / 2


@given(unit, unit, unit, st.floats(0.01, 0.5))
def test_label_matches_branch_oracle(vi, vj, vn, mu):
    assert label_sigma(vi, vj, vn, mu, 0.01) == _brute(vi, vj, vn, mu, 0.01)


@given(unit, unit, unit, st.floats(0.01, 0.5))
def test_label_agrees_with_grid(vi, vj, vn, mu):
    assume(abs(vj - vi) > 2e-3)
    on = (vi + mu * (vj - vi) - vn) ** 2
    off = (vi - vn) ** 2
    assume(abs(on - off) > 1e-12)  # exact ties are a measure-zero degenerate case
    assert abs(label_sigma(vi, vj, vn, mu, 0.01) - label_sigma_oracle(vi, vj, vn, mu)) <= 1e-3 + 0.01


@given(unit, unit, st.floats(0.01, 0.5), st.floats(1e-4, 0.1))
def test_interaction_label_roundtrip(vi, vj, mu, delta):
    vn = bcm_pair_update(vi, vj, BcmParams(mu, 1.0))
    lab = label_sigma(vi, vj, vn, mu, delta)
    assert bcm_pair_update(vi, vj, BcmParams(mu, lab)) == vn


def _net(ego_id, n_alters=5, n_seg=20, seed=0):
    s = np.random.default_rng(seed).uniform(size=(1 + n_alters, n_seg, 5))
    return EgoNetwork(ego_id, tuple(f"{ego_id}.{k}" for k in range(n_alters)), s)


def test_build_dataset_counts():
    d = build_dataset([_net("e")])
    assert len(d) == 5 * 19 * 5
    assert d.X.shape == (475, 4) and d.y.shape == (475,)
    assert d.provenance["tuples"] == 475


def test_build_dataset_empty_and_short():
    d = build_dataset([])
    assert len(d) == 0 and d.warnings
    d = build_dataset([_net("x", n_seg=1), _net("y", n_seg=2)])
    assert len(d) == 25 and any("x" in w for w in d.warnings)


def test_build_dataset_order_independent():
    nets = [_net(f"e{k}", seed=k) for k in range(4)]
    a = build_dataset(nets)
    b = build_dataset(nets[::-1])
    assert a.tuples == b.tuples


def test_synthetic_labels_recover_true_sigma_on_interacting_pairs():
    # noiseless, one alter: whenever the ego moved, the label lies between the gap and gap + delta
    res = generate_synthetic(SynthSpec(20, 1, 10, 0.4, (0.2, 0.8), seed=3))
    truth = {g.ego_id: g.true_sigma for g in res.truth}
    d = build_dataset(res.networks)
    for t in d:
        gap = abs(t.v_j_t - t.v_i_t)
        if t.v_i_next != t.v_i_t:
            assert gap <= truth[t.ego_id] + 1e-12
            assert t.sigma_label == pytest.approx(min(gap + 0.01, 1.0))
        elif gap > 0:
            assert gap > truth[t.ego_id]


def _dataset(n_egos):
    return build_dataset([_net(f"e{k:02d}", n_alters=1, n_seg=2, seed=k) for k in range(n_egos)])


def test_split_counts_and_determinism():
    d = _dataset(10)
    s = split_dataset(d, (0.7, 0.2, 0.1), seed=4)
    assert (len(s.train.egos()), len(s.test.egos()), len(s.validation.egos())) == (7, 2, 1)
    again = split_dataset(d, (0.7, 0.2, 0.1), seed=4)
    assert all(x.tuples == y.tuples for x, y in zip(s, again))
    parts = [set(p.egos()) for p in s]
    assert set.union(*parts) == set(d.egos()) and sum(map(len, parts)) == 10


def test_split_without_validation():
    s = split_dataset(_dataset(10), (0.7, 0.3, 0.0), seed=0)
    assert len(s.validation) == 0 and len(s.test.egos()) == 3


def test_split_too_small():
    with pytest.raises(DataError):
        split_dataset(_dataset(2), (0.7, 0.2, 0.1))
    with pytest.raises(ParameterError):
        split_dataset(_dataset(5), (0.5, 0.5, 0.5))


@given(st.integers(3, 40), st.integers(0, 1000))
def test_split_partitions_egos(n, seed):
    d = _dataset(n)
    s = split_dataset(d, (0.7, 0.2, 0.1), seed)
    egos = [e for p in s for e in p.egos()]
    assert sorted(egos) == sorted(d.egos())
    assert all(len(p) > 0 for p in s)


def test_dataset_roundtrip(tmp_path):
    d = build_dataset([_net("e1", 2, 3), _net("e2", 3, 4, seed=9)])
    path = tmp_path / "d.csv"
    save_dataset(d, path)
    header = path.read_text().splitlines()[1]
    assert header == ",".join(CSV_COLUMNS)
    back = load_dataset(path)
    assert back.tuples == d.tuples and back.provenance == d.provenance


def test_load_dataset_bad_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(DataError):
        load_dataset(p)
