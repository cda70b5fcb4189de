import json

import numpy as np
import pytest

from conftest import two_clusters
from squeak import Dataset, Estimator, KernelSpec, RngStream, exact_rls, gram_matrix, init_full, serialize
from squeak.distributed import MergeTree, TreeError, build_tree, merge, merge_estimator, node_dataset, run
from squeak.rls import concatenate, shrunk_scores
from squeak.sequential import SqueakConfig, qbar_from_theorem, run as squeak_run
from squeak.validate import check_accuracy

RBF = KernelSpec.gaussian(1.0)


def test_single_leaf_tree():
    t = build_tree(1, "balanced")
    assert t.merges == 0 and t.root == 0 and t.height(0) == 1


def test_balanced_four():
    t = build_tree(4, "balanced")
    assert t.merges == 3
    assert t.parents == (4, 4, 5, 5, 6, 6, None)
    assert [t.height(j) for j in range(7)] == [1, 1, 1, 1, 2, 2, 3]


def test_unbalanced_four():
    t = build_tree(4, "unbalanced")
    assert t.merges == 3
    assert t.parents == (4, 4, 5, 6, 5, 6, None)
    assert t.path_to_root(0) == [0, 4, 5, 6]


def test_balanced_odd_carries_up():
    t = build_tree(5, "balanced")
    assert t.merges == 4 and t.height(t.root) == 4
    assert t.leaves_under(t.root) == [0, 1, 2, 3, 4]


@pytest.mark.parametrize(
    "parents",
    [
        [3, 3, None, None, None],  # two roots
        [3, 3, 4, 4, 3],  # cycle, no root
        [3, 3, 3, 4, None],  # three children
        [1, 3, 3, 4, None],  # leaf used as parent
        [3, 3, 4, None],  # wrong length
    ],
)
def test_custom_tree_rejected(parents):
    with pytest.raises(TreeError):
        build_tree(3, "custom", parents)


def test_custom_tree_from_json(tmp_path):
    path = tmp_path / "tree.json"
    path.write_text(json.dumps({"shape": "custom", "k": 3, "parents": [4, 3, 3, 4, None]}))
    t = MergeTree.load(path)
    assert t.children(4) == (0, 3) and t.children(3) == (1, 2)
    assert MergeTree.from_json(t.to_json()) == t


@pytest.mark.parametrize("obj", [{"shape": "zigzag", "k": 3}, {"shape": "balanced", "k": "3"}, {"shape": "balanced", "k": 0}, []])
def test_bad_tree_spec(obj):
    with pytest.raises(TreeError):
        MergeTree.from_json(obj)


def test_merge_of_exact_leaves_estimates_exact_scores():
    rng = np.random.default_rng(0)
    data = Dataset(rng.normal(size=(24, 2)))
    a_data, b_data = data.partition(2)
    a = init_full(a_data, RBF, 0.7, 0.0, 30)
    b = init_full(b_data, RBF, 0.7, 0.0, 30)
    union = concatenate([a, b])
    est = merge_estimator([a, b])
    tau_tilde = shrunk_scores(gram_matrix(RBF, data), union.weights(), 0.7, 0.0, est)
    np.testing.assert_allclose(tau_tilde, exact_rls(gram_matrix(RBF, data), 0.7), rtol=1e-10)


def test_merge_estimator_counts_approximate_inputs():
    data = Dataset(np.arange(8.0)[:, None])
    a = init_full(data.subset([0, 1, 2, 3]), RBF, 1.0, 0.5, 10)
    b = init_full(data.subset([4, 5, 6, 7]), RBF, 1.0, 0.5, 10)
    shrunk = b.replace(b.indices[:2], b.p_tilde[:2], b.q[:2])
    assert merge_estimator([a, b]) == Estimator(1)
    assert merge_estimator([a, shrunk]) == Estimator(1)
    assert merge_estimator([shrunk, shrunk]) == Estimator(2)


def test_merge_rejects_empty_sibling_and_overlap():
    data = Dataset(np.arange(6.0)[:, None])
    a = init_full(data.subset([0, 1, 2]), RBF, 1.0, 0.5, 5)
    empty = a.replace([], [], [], n_processed=0)
    with pytest.raises(ValueError, match="empty"):
        merge(a, empty, data, RngStream(0, 0))
    with pytest.raises(ValueError):
        merge(a, init_full(data.subset([2, 3]), RBF, 1.0, 0.5, 5), data, RngStream(0, 0))
    with pytest.raises(ValueError):
        merge(a, init_full(data.subset([3, 4]), RBF, 1.0, 0.5, 6), data, RngStream(0, 0))


def test_merge_of_full_halves_is_accurate_and_small():
    data = two_clusters(40, seed=3)
    q_bar = qbar_from_theorem(40, 0.5, 0.5, "merge")
    left, right = data.partition(2)
    a = init_full(left, RBF, 1.0, 0.5, q_bar)
    b = init_full(right, RBF, 1.0, 0.5, q_bar)
    out = merge(a, b, data, RngStream(0, 2, (1,)))
    rep = check_accuracy(data, out)
    assert rep.passed and rep.within_size_bound
    assert out.n_processed == 40


def test_workers_do_not_change_result():
    data = two_clusters(64, seed=1)
    cfg = SqueakConfig(1.0, 0.5, kernel=RBF, q_bar_override=30, seed=11)
    tree = build_tree(8, "balanced")
    roots = [serialize(run(data, cfg, tree, workers=w).dictionary) for w in (1, 4)]
    assert roots[0] == roots[1]


def test_singleton_unbalanced_tracks_sequential():
    data = two_clusters(60, seed=2)
    cfg = SqueakConfig(1.0, 0.5, kernel=RBF, seed=4)
    res = run(data, cfg, build_tree(60, "unbalanced"))
    seq = squeak_run(data, cfg)
    K = gram_matrix(RBF, data)
    for d in (res.dictionary, seq.dictionary):
        rep = check_accuracy(data, d, K)
        assert rep.passed and rep.within_size_bound


def test_balanced_has_shorter_critical_path():
    data = two_clusters(256, seed=0)
    cfg = SqueakConfig(1.0, 0.5, kernel=RBF, seed=0)
    bal = run(data, cfg, build_tree(8, "balanced"))
    unb = run(data, cfg, build_tree(8, "unbalanced"))
    assert bal.merges == unb.merges == 7
    assert bal.work.critical_path < unb.work.critical_path
    assert bal.work.total_work >= bal.work.critical_path
    total, bound = bal.work.unit_work_bound()
    assert total == 7 and bound == 8


def test_intermediate_nodes_are_accurate():
    data = two_clusters(96, seed=5)
    cfg = SqueakConfig(1.0, 0.5, kernel=RBF, seed=1)
    tree = build_tree(6, "balanced")
    res = run(data, cfg, tree, keep_nodes=True)
    assert set(res.nodes) == set(range(tree.n_nodes))
    for node, d in res.nodes.items():
        sub = node_dataset(data, tree, node)
        assert d.n_processed == len(sub)
        assert check_accuracy(sub, d).passed


def test_nested_leaf_runs_sequential():
    data = two_clusters(40, seed=6)
    cfg = SqueakConfig(1.0, 0.5, kernel=RBF, q_bar_override=8, seed=2)
    res = run(data, cfg, build_tree(2, "balanced"), leaf_threshold=10)
    leaf_cost = res.work.costs[0]
    assert leaf_cost.factor_cost > 0 and leaf_cost.kernel_evals > 0
    assert res.dictionary.n_processed == 40


def test_too_many_leaves():
    with pytest.raises(TreeError):
        run(Dataset(np.zeros((3, 1))), SqueakConfig(1.0, 0.5, q_bar_override=3), build_tree(4))


def test_report_json_round_trips_through_json():
    data = two_clusters(32, seed=0)
    res = run(data, SqueakConfig(1.0, 0.5, kernel=RBF, q_bar_override=12, seed=3), build_tree(4, "unbalanced"))
    obj = json.loads(json.dumps(res.to_json()))
    assert obj["work"]["merges"] == 3 and obj["seed"] == 3 and obj["tree"] == {"shape": "unbalanced", "k": 4}
