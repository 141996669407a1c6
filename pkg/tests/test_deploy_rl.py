import numpy as np
import pytest

from secure_aris.channel import build_channels
from secure_aris.dense_nets import finite_difference, relative_error
from secure_aris.deploy_rl import (Action, Batch, DdpgNets, DeploymentPolicy, ReplayBuffer,
                                   TrainingConfig, Transition, actor_gradient, actor_objective,
                                   critic_gradient, critic_loss, env_step, episode_channel_seed,
                                   feature_dim, grid_points, grid_search_deploy, reset_state,
                                   rollout_policy, soft_update, state_features, train)
from secure_aris.errors import SecureArisError
from secure_aris.config import EXPERIMENT_WORKERS
from secure_aris.inner_opt import InnerBudget
from secure_aris.scenario import Placement
from tests.conftest import PLACEMENT

QUICK = InnerBudget(max_outer=1, sca_rounds=3, lemma_rounds=3)


def random_batch(rng, size=8, dim=5):
    return Batch(rng.standard_normal((size, dim)), rng.uniform(-2, 2, (size, 2)),
                 rng.standard_normal(size), rng.standard_normal((size, dim)))


def small_nets(dim=5, seed=0):
    return DdpgNets.create(dim, hidden=(8, 6), a_max=2.0, seed=seed)


def constant_critic(nets, value):
    last = nets.critic.layers[-1]
    last.W[...] = 0.0
    last.b[...] = value
    nets.critic_target = nets.critic.copy()


def test_replay_buffer_overwrites_the_oldest(rng):
    buffer = ReplayBuffer(3, state_dim=2, seed=1)
    for i in range(5):
        buffer.add(Transition(np.full(2, i), np.zeros(2), float(i), np.full(2, i + 1)))
    assert len(buffer) == 3
    assert sorted(buffer.rewards) == [2.0, 3.0, 4.0]
    batch = buffer.sample(3)
    assert sorted(batch.rewards) == [2.0, 3.0, 4.0]
    np.testing.assert_array_equal(batch.next_states[:, 0], batch.rewards + 1)
    with pytest.raises(SecureArisError):
        buffer.sample(4)
    with pytest.raises(SecureArisError):
        buffer.add(Transition(np.zeros(2), np.zeros(2), float("nan"), np.zeros(2)))


def test_replay_sampling_is_without_replacement():
    buffer = ReplayBuffer(50, state_dim=1, seed=3)
    for i in range(50):
        buffer.add(Transition(np.zeros(1), np.zeros(2), float(i), np.zeros(1)))
    for _ in range(20):
        rewards = buffer.sample(50).rewards
        assert len(set(rewards.tolist())) == 50


def test_critic_loss_vanishes_at_the_fixed_point(rng):
    nets = small_nets()
    zeta, discount = 1.7, 0.9
    constant_critic(nets, zeta)
    batch = random_batch(rng)._replace(rewards=np.full(8, (1 - discount) * zeta))
    assert critic_loss(batch, nets, discount) == pytest.approx(0.0, abs=1e-24)


def test_undiscounted_targets_are_the_rewards(rng):
    nets = small_nets()
    batch = random_batch(rng)
    q = nets.q_value(batch.states, batch.actions)
    assert critic_loss(batch, nets, discount=0.0) == pytest.approx(np.mean((batch.rewards - q) ** 2))


def test_critic_gradient_matches_finite_differences(rng):
    nets = small_nets(seed=1)
    batch = random_batch(rng)
    _, grads = critic_gradient(batch, nets)
    analytic = np.concatenate([g.reshape(-1) for g in grads])
    original = nets.critic.get_flat()

    def f(flat):
        nets.critic.set_flat(flat)
        return critic_loss(batch, nets)

    numeric = finite_difference(f, original)
    nets.critic.set_flat(original)
    assert relative_error(analytic, numeric, floor=1e-6) < 1e-4


def test_actor_gradient_matches_finite_differences(rng):
    nets = small_nets(seed=2)
    batch = random_batch(rng)
    analytic = np.concatenate([g.reshape(-1) for g in actor_gradient(batch, nets)])
    original = nets.actor.get_flat()

    def f(flat):
        nets.actor.set_flat(flat)
        return actor_objective(batch, nets)

    numeric = finite_difference(f, original)
    nets.actor.set_flat(original)
    assert relative_error(analytic, numeric, floor=1e-6) < 1e-4


def test_constant_critic_gives_no_policy_gradient(rng):
    nets = small_nets(seed=3)
    constant_critic(nets, -0.4)
    for g in actor_gradient(random_batch(rng), nets):
        np.testing.assert_array_equal(g, 0.0)


def test_soft_update(rng):
    nets = small_nets(seed=4)
    source, target = nets.actor, nets.actor.copy()
    target.set_flat(rng.standard_normal(target.n_params))
    before = target.get_flat()
    np.testing.assert_array_equal(soft_update(target, source, 0.0).get_flat(), before)
    gap = np.linalg.norm(before - source.get_flat())
    for n in range(1, 6):
        soft_update(target, source, 0.25)
        assert np.linalg.norm(target.get_flat() - source.get_flat()) == pytest.approx(gap * 0.75 ** n)
    np.testing.assert_allclose(soft_update(target, source, 1.0).get_flat(), source.get_flat())
    with pytest.raises(SecureArisError):
        soft_update(nets.critic, nets.actor)


def test_state_features_have_the_declared_size(desk, small):
    for scenario in (desk, small):
        channels = build_channels(scenario, PLACEMENT, seed=3)
        features = state_features(scenario, PLACEMENT, channels)
        assert features.shape == (feature_dim(scenario),)
        assert np.all(np.isfinite(features))
        assert np.all(np.abs(features[:2]) <= 1.0)


def test_episode_seeds():
    assert episode_channel_seed(3, 5) == episode_channel_seed(3, 5)
    assert len({episode_channel_seed(3, e) for e in range(100)}) == 100


def test_training_config_noise_schedule():
    config = TrainingConfig(episodes=11, noise_start=0.5, noise_end=0.1)
    assert config.noise_scale(0) == pytest.approx(0.5)
    assert config.noise_scale(10) == pytest.approx(0.1)
    assert config.noise_scale(5) == pytest.approx(0.3)


def test_action_clipping():
    np.testing.assert_array_equal(Action(np.array([30.0, -0.5])).clipped(10.0).delta_xy, [10.0, -0.5])


def test_policy_round_trip(tmp_path, rng):
    policy = DeploymentPolicy(small_nets(seed=5).actor, 2.0)
    policy.save(tmp_path / "actor.ckpt")
    loaded = DeploymentPolicy.load(tmp_path / "actor.ckpt")
    assert loaded.a_max == 2.0
    features = rng.standard_normal(5)
    np.testing.assert_array_equal(loaded.act(features), policy.act(features))


def test_grid_points(desk):
    points = grid_points(desk, 50.0)
    assert len(points) == 9 * 9
    assert (0.0, 0.0) in points and (400.0, 400.0) in points
    with pytest.raises(SecureArisError):
        grid_points(desk, 0.0)


def test_env_step_clips_and_rewards_the_rate_change(tiny):
    state = reset_state(tiny, PLACEMENT, channel_seed=4, budget=QUICK)
    next_state, reward = env_step(tiny, state, Action(np.array([100.0, -100.0])), QUICK, a_max=10.0)
    np.testing.assert_allclose(next_state.placement.array, PLACEMENT.array + [10.0, -10.0])
    assert reward == pytest.approx(next_state.rate - state.rate)
    assert next_state.channel_seed == state.channel_seed


@pytest.mark.parametrize("fixture", ["tiny", "small"])
@pytest.mark.parametrize("channel_seed", [0, 1, 2, 3, 4])
def test_zero_action_keeps_the_rate(request, fixture, channel_seed):
    scenario = request.getfixturevalue(fixture)
    state = reset_state(scenario, PLACEMENT, channel_seed=channel_seed, budget=QUICK)
    next_state, reward = env_step(scenario, state, Action(np.zeros(2)), QUICK)
    assert next_state.placement == state.placement
    assert abs(reward) <= 1e-3
    assert next_state.rate == pytest.approx(state.rate, abs=1e-3)
    assert next_state.channel_seed == state.channel_seed


def test_push_into_the_boundary_earns_nothing(tiny):
    corner = Placement((400.0, 0.0))
    state = reset_state(tiny, corner, channel_seed=1, budget=QUICK)
    next_state, reward = env_step(tiny, state, Action(np.array([10.0, -10.0])), QUICK)
    assert next_state.placement.xy == (400.0, 0.0)
    assert reward == 0.0


def test_env_step_stays_in_the_area(tiny):
    corner = Placement((395.0, 2.0))
    state = reset_state(tiny, corner, channel_seed=1, budget=QUICK)
    next_state, _ = env_step(tiny, state, Action(np.array([10.0, -10.0])), QUICK)
    assert next_state.placement.xy == (400.0, 0.0)


def test_grid_search_over_given_points(tiny):
    points = [(161.0, 89.0), (300.0, 50.0)]
    placement, rate, table = grid_search_deploy(tiny, 50.0, seed=2, budget=QUICK, points=points)
    assert placement.xy in points
    assert len(table) == 2
    assert rate == pytest.approx(table["rate"].max())


@pytest.mark.slow
def test_short_training_run(tiny, tmp_path):
    config = TrainingConfig(episodes=3, epochs_per_episode=3, warmup=4, batch_size=4,
                            hidden=(16, 16), inner_budget=QUICK, final_full_solve=False)
    policy, metrics = train(tiny, seed=1, config=config, out_dir=tmp_path)
    assert len(metrics.final_rates) == 3
    assert len(metrics.critic_losses) > 0
    assert (tmp_path / "actor.ckpt").exists() and (tmp_path / "training.csv").exists()
    frame = metrics.to_frame()
    assert list(frame["episode"]) == [0, 1, 2]

    final, rate, path = rollout_policy(policy, tiny, PLACEMENT, steps=2, channel_seed=9,
                                       budget=QUICK)
    assert len(path) == 3 and path[-1] == final.xy
    assert rate >= 0.0


@pytest.mark.slow
def test_refining_the_grid_never_lowers_the_rate(tiny):
    # the 200 m grid is a subset of the 100 m grid, and cells share the channel seed
    _, coarse, coarse_table = grid_search_deploy(tiny, 200.0, seed=2, budget=QUICK)
    _, fine, fine_table = grid_search_deploy(tiny, 100.0, seed=2, budget=QUICK)
    assert len(coarse_table) == 9 and len(fine_table) == 25
    assert fine >= coarse - 1e-9


@pytest.mark.slow
def test_training_improves_the_deployment(desk, tmp_path):
    # warm-up shortened so that 150 x 30 transitions leave room for learning steps
    config = TrainingConfig(episodes=150, epochs_per_episode=30, warmup=1000)
    policy, metrics = train(desk, seed=3, config=config, out_dir=tmp_path)
    first, last = np.mean(metrics.final_rates[:20]), np.mean(metrics.final_rates[-20:])
    assert last >= first

    channel_seed = 17
    _, searched, _ = grid_search_deploy(desk, 50.0, seed=channel_seed, workers=EXPERIMENT_WORKERS)
    _, deployed, _ = rollout_policy(policy, desk, Placement((200.0, 200.0)), steps=30,
                                    channel_seed=channel_seed)
    assert deployed >= 0.9 * searched
