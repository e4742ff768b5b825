import numpy as np
import pytest

from topodeeponet.deeponet import BranchNetwork, TopologicalDeepONet, TrunkNetwork, tensor_grid
from topodeeponet.errors import RejectedInputError
from topodeeponet.operators import Antiderivative
from topodeeponet.spaces import MeasurementSpace, coordinate_family
from topodeeponet.toponet import FunctionalLayer, TopoNetwork
from topodeeponet.training import (
    OperatorDataset,
    TrainConfig,
    deeponet_parameters,
    deeponet_with_parameters,
    generate_dataset,
    gradient_check,
    mse_and_gradient,
    predict,
    random_deeponet,
    train,
)


@pytest.fixture(scope="module")
def small_data(antideriv_family):
    op = Antiderivative(antideriv_family)
    return op, generate_dataset(op, antideriv_family, 40, tensor_grid([0], [1], 21), 0)


def test_generate_dataset_examples(antideriv_family):
    op = Antiderivative(antideriv_family)
    d = generate_dataset(op, antideriv_family, 2, [[0.5]], 3)
    assert len(d.records()) == 2
    a = generate_dataset(op, antideriv_family, 30, tensor_grid([0], [1], 5), 11)
    b = generate_dataset(op, antideriv_family, 30, tensor_grid([0], [1], 5), 11)
    assert np.array_equal(a.targets, b.targets) and a.split == b.split
    assert set(a.train_index).isdisjoint(a.validation_index)
    assert len(a.train_index) == 24
    for c, u, y, g, _ in a.records()[:5]:
        exact = sum(ci * gen.integral(y[0]) for ci, gen in zip(c, antideriv_family.generators))
        assert abs(g[0] - exact) <= 1e-12
    with pytest.raises(RejectedInputError):
        generate_dataset(op, antideriv_family, 1, [[0.5]], 0)


def test_zero_target_history_constant(antideriv_family):
    sp = antideriv_family.space
    op = Antiderivative(antideriv_family)
    d = generate_dataset(op, antideriv_family, 10, [[0.0]], 0)  # G(u)(0) = 0
    col = TopoNetwork(FunctionalLayer(sp, np.zeros((2, sp.dim)), np.zeros(2)), np.zeros((1, 2)))
    model = TopologicalDeepONet(BranchNetwork((col,)), TrunkNetwork([[0.0]], [0.0], mixing=None), ([0.0], [1.0]))
    res = train(model, d, TrainConfig(epochs=5))
    assert all(abs(h["train_mse"]) <= 1e-30 for h in res.history)


def test_one_record_interpolates(antideriv_family):
    op = Antiderivative(antideriv_family)
    d = generate_dataset(op, antideriv_family, 2, [[0.7]], 5)
    one = d.subset(d.train_index)
    one = OperatorDataset(one.family, one.params, one.coeffs, one.ys, one.targets, ("train",), 0)
    model = random_deeponet(antideriv_family.space, 2, [3], 1, op.domain, np.random.default_rng(0))
    res = train(model, one, TrainConfig(epochs=400, learning_rate=1e-2))
    assert res.history[-1]["train_mse"] <= 1e-6


def test_history_and_best_checkpoint(small_data):
    op, data = small_data
    model = random_deeponet(data.space, 4, [8], 1, op.domain, np.random.default_rng(1))
    cfg = TrainConfig(seed=3, epochs=15, learning_rate=5e-3)
    res = train(model, data, cfg)
    assert len(res.history) == 15
    best = min(h["validation_mse"] for h in res.history)
    va = data.validation_index
    got = float(np.mean((predict(res.model, data.coeffs[va], data.ys) - data.targets[va]) ** 2))
    assert abs(got - best) <= 1e-15 * max(1.0, best)
    assert res.history[-1]["best_validation_mse"] <= res.history[0]["validation_mse"]
    again = train(model, data, cfg)
    assert again.history == res.history


def test_freeze_functionals(small_data):
    op, data = small_data
    model = random_deeponet(data.space, 2, [3], 1, op.domain, np.random.default_rng(2))
    res = train(model, data, TrainConfig(epochs=3, freeze_functionals=True))
    for before, after in zip(model.branch.columns, res.model.branch.columns):
        assert np.array_equal(before.layer.weights, after.layer.weights)


def test_divergence_flag(small_data):
    op, data = small_data
    model = random_deeponet(data.space, 2, [3], 1, op.domain, np.random.default_rng(0))
    bad = OperatorDataset(data.family, data.params, data.coeffs, data.ys, data.targets * 1e300, data.split)
    res = train(model, bad, TrainConfig(epochs=3))
    assert res.diverged and res.notes


def test_gradient_linear_toy():
    sp = MeasurementSpace.sequence_lp(1)
    fam = coordinate_family(sp, [0], (-1.0, 1.0))

    class Lin:
        kind = type("K", (), {"value": "toy"})()
        space = sp

        def field(self, u, ys):
            return 0.3 * u.coeffs[0] * ys

    d = generate_dataset(Lin(), fam, 6, [[0.2], [0.9]], 0)
    # m = p = 1; with relu-free identity-like pieces the MSE is polynomial in the output weight
    col = TopoNetwork(FunctionalLayer(sp, [[0.8]], [0.1]), [[1.3]])
    model = TopologicalDeepONet(BranchNetwork((col,)), TrunkNetwork([[0.5]], [0.2], mixing=[[1.1]]), ([0.0], [1.0]))
    assert gradient_check(model, d, 1e-6) <= 1e-8


def test_gradient_check_tanh(small_data):
    op, data = small_data
    for seed in range(3):
        model = random_deeponet(data.space, 3, [4, 3], 1, op.domain, np.random.default_rng(seed))
        assert gradient_check(model, data, 1e-6, index=data.train_index[:5]) <= 1e-5


def test_gradient_check_relu_guarded(small_data):
    op, data = small_data
    model = random_deeponet(data.space, 3, [4, 3], 1, op.domain, np.random.default_rng(1), activation="relu")
    assert gradient_check(model, data, 1e-6, index=data.train_index[:8]) <= 1e-5


def test_gradient_check_rejects_eps(small_data):
    op, data = small_data
    model = random_deeponet(data.space, 1, [2], 1, op.domain, np.random.default_rng(0))
    with pytest.raises(RejectedInputError):
        gradient_check(model, data, 1e-2)


def test_parameter_round_trip(small_data):
    op, data = small_data
    model = random_deeponet(data.space, 3, [4], 1, op.domain, np.random.default_rng(0))
    v = deeponet_parameters(model)
    back = deeponet_with_parameters(model, v)
    assert np.array_equal(deeponet_parameters(back), v)
    loss, grad = mse_and_gradient(model, data.coeffs, data.ys, data.targets)
    assert grad.shape == v.shape and np.isfinite(loss)
