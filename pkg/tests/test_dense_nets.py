import numpy as np
import pytest

from secure_aris.dense_nets import (AdamOptimizer, DenseLayer, DenseNet, finite_difference,
                                    relative_error)
from secure_aris.errors import SecureArisError
from secure_aris.persistence import load_checkpoint, save_checkpoint


def check_parameter_gradient(net, loss_of_output, x):
    """Compare backward() with central differences of loss(net(x))"""
    out = net(x)
    grad_out = loss_of_output(out, grad=True)
    grads, _ = net.backward(grad_out)
    analytic = np.concatenate([g.reshape(-1) for g in grads])
    original = net.get_flat()

    def f(flat):
        net.set_flat(flat)
        return loss_of_output(net(x))

    numeric = finite_difference(f, original)
    net.set_flat(original)
    return relative_error(analytic, numeric, floor=1e-6)


def weighted_sum(weights):
    def loss(out, grad=False):
        return weights if grad else float(np.sum(weights * out))
    return loss


def test_parameter_gradients_match_finite_differences(rng):
    for output in ("tanh", "linear"):
        net = DenseNet((4, 6, 5, 3), output, output_scale=2.5, seed=3)
        x = rng.standard_normal((7, 4))
        weights = rng.standard_normal((7, 3))
        assert check_parameter_gradient(net, weighted_sum(weights), x) < 1e-4


def test_input_gradient_matches_finite_differences(rng):
    net = DenseNet((3, 8, 2), "tanh", output_scale=4.0, seed=5)
    x = rng.standard_normal(3)
    weights = rng.standard_normal((1, 2))
    net(x)
    _, grad_x = net.backward(weights)
    numeric = finite_difference(lambda v: float(np.sum(weights * net(v))), x)
    assert relative_error(grad_x[0], numeric, floor=1e-6) < 1e-4


def test_actor_output_never_leaves_its_bounds(rng):
    net = DenseNet((12, 32, 32, 2), "tanh", output_scale=10.0, seed=0)
    states = 100.0 * rng.standard_normal((10_000, 12))
    assert np.all(np.abs(net(states)) <= 10.0)


def test_critic_starts_near_zero(rng):
    net = DenseNet((6, 16, 1), "linear", seed=2)
    assert np.abs(net(rng.standard_normal((50, 6)))).max() < 1.0


def test_flat_parameters_and_copy(rng):
    net = DenseNet((3, 4, 2), seed=1)
    assert net.n_params == 3 * 4 + 4 + 4 * 2 + 2
    flat = rng.standard_normal(net.n_params)
    net.set_flat(flat)
    np.testing.assert_array_equal(net.get_flat(), flat)
    twin = net.copy()
    twin.layers[0].W += 1.0
    np.testing.assert_array_equal(net.get_flat(), flat)
    with pytest.raises(SecureArisError):
        net.set_flat(flat[:-1])


def test_adam_first_step_moves_by_the_learning_rate(rng):
    net = DenseNet((2, 3, 1), seed=4)
    before = net.get_flat()
    grads = [rng.standard_normal(p.shape) for p in net.parameters()]
    AdamOptimizer(net, lr=0.01).step(grads)
    expected = before - 0.01 * np.sign(np.concatenate([g.reshape(-1) for g in grads]))
    np.testing.assert_allclose(net.get_flat(), expected, atol=1e-5)


def test_adam_descends_a_quadratic():
    net = DenseNet((1, 1), seed=0)
    opt = AdamOptimizer(net, lr=0.05)
    for _ in range(1000):
        opt.step([2 * (p - 3.0) for p in net.parameters()])
    np.testing.assert_allclose(net.get_flat(), 3.0, atol=2e-2)


def test_checkpoint_round_trip(tmp_path, rng):
    net = DenseNet((5, 7, 2), "tanh", output_scale=3.0, seed=8)
    path = tmp_path / "actor.ckpt"
    net.save(path)
    loaded = DenseNet.load(path)
    assert loaded.sizes == net.sizes
    assert loaded.output_activation == "tanh"
    x = rng.standard_normal((4, 5))
    np.testing.assert_array_equal(loaded(x), net(x))


def test_checkpoint_rejects_foreign_files(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(SecureArisError):
        load_checkpoint(path)
    save_checkpoint(path, [np.ones(3)])
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(SecureArisError):
        load_checkpoint(path)


def test_layer_misuse(rng):
    with pytest.raises(SecureArisError):
        DenseLayer(2, 2, "relu", rng)
    with pytest.raises(SecureArisError):
        DenseLayer(2, 2, "tanh", rng).backward(np.ones((1, 2)))
    with pytest.raises(SecureArisError):
        DenseNet((3,))
