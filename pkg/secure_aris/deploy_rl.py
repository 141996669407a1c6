"""
Aerial Deployment Learning
Deployment MDP around the inner robust optimizer, a DDPG agent built on the in-repo dense
networks, and the grid-search deployment baseline
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, NamedTuple, Optional, Tuple, Union

import numpy as np
import pandas as pd
from rich.console import Console
from rich.progress import BarColumn, Progress, TextColumn, TimeRemainingColumn

from .channel import ChannelSet, build_channels
from .config import *
from .dense_nets import AdamOptimizer, DenseNet
from .errors import SecureArisError, SolverError, TrainingDivergedError
from .inner_opt import InnerBudget, TransmitStrategy, bcd_solve, certify_strategy
from .scenario import Placement, Scenario

console = Console()


def _compress(x: np.ndarray) -> np.ndarray:
    """Signed log compression, keeps features of very different scales comparable"""
    return np.sign(x) * np.log1p(np.abs(x))


def _complex_features(*arrays: np.ndarray) -> np.ndarray:
    parts = []
    for a in arrays:
        flat = np.asarray(a).reshape(-1)
        parts.append(np.stack([flat.real, flat.imag], axis=-1).reshape(-1))
    return _compress(np.concatenate(parts))


def state_features(scenario: Scenario, placement: Placement, channels: ChannelSet) -> np.ndarray:
    """Placement scaled to [-1, 1], legitimate channels, eavesdropper estimates and radii"""
    x0, x1, y0, y1 = scenario.area_bounds
    xy = placement.array
    scaled = np.array([2 * (xy[0] - x0) / (x1 - x0) - 1, 2 * (xy[1] - y0) / (y1 - y0) - 1])
    cs = channels.normalized()
    legit = _complex_features(cs.h_SAD, cs.h_SRD, cs.h_JD, cs.h_JRD)
    eves = _complex_features(cs.h_SAk_hat, cs.h_SRk_hat, cs.h_Jk_hat, cs.H_JRk_hat)
    radii = _compress(np.concatenate([cs.r_SAk, cs.r_SRk, cs.r_Jk, cs.r_JRk]))
    return np.concatenate([scaled, legit, eves, radii])


def feature_dim(scenario: Scenario) -> int:
    n_a, n_r, m, k = scenario.n_aris, scenario.n_fixed, scenario.n_jam_antennas, scenario.n_eves
    legit = n_a + n_r + m + n_r * m
    eves = k * (n_a + n_r + m + n_r * m)
    return 2 + 2 * legit + 2 * eves + 4 * k


@dataclass
class MdpState:
    """Observation plus what the environment needs to continue from it"""
    placement: Placement
    features: np.ndarray
    rate: float                                   # R_S at this placement, b/s/Hz
    channel_seed: int
    strategy: Optional[TransmitStrategy] = None   # warm start for the next step
    failures: int = 0


@dataclass
class Action:
    delta_xy: np.ndarray

    def clipped(self, a_max: float) -> "Action":
        return Action(np.clip(np.asarray(self.delta_xy, dtype=float), -a_max, a_max))


class Transition(NamedTuple):
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray


class Batch(NamedTuple):
    states: np.ndarray       # (D, F)
    actions: np.ndarray      # (D, 2)
    rewards: np.ndarray      # (D,)
    next_states: np.ndarray  # (D, F)


class ReplayBuffer:
    """Fixed-capacity ring of transitions; the oldest entry is overwritten when full"""

    def __init__(self, capacity: int, state_dim: int, action_dim: int = 2, seed: int = 0):
        if capacity < 1:
            raise SecureArisError("replay capacity must be positive")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.size = 0
        self.cursor = 0
        self.rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return self.size

    def add(self, transition: Transition):
        if not np.isfinite(transition.reward):
            raise SecureArisError("refusing to store a non-finite reward")
        i = self.cursor
        self.states[i] = transition.state
        self.actions[i] = transition.action
        self.rewards[i] = transition.reward
        self.next_states[i] = transition.next_state
        self.cursor = (self.cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int) -> Batch:
        if batch_size > self.size:
            raise SecureArisError(f"cannot draw {batch_size} transitions from {self.size}")
        idx = self.rng.choice(self.size, size=batch_size, replace=False)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx])


def _solve_at(scenario: Scenario, placement: Placement, channel_seed: int,
              budget: InnerBudget, warm: Optional[TransmitStrategy]):
    """Robust rate at a placement; falls back to certifying the warm start on failure"""
    channels = build_channels(scenario, placement, channel_seed)
    try:
        solution = bcd_solve(channels, init=warm, budget=budget, seed=channel_seed)
        return channels, solution.robust_rate, solution.strategy, False
    except SolverError as e:
        console.print(f"[yellow]Warning: inner solve failed at {placement.xy}: {e}[/yellow]")
    if warm is not None:
        try:
            return channels, certify_strategy(warm, channels).robust_rate, warm, True
        except SolverError:
            pass
    return channels, 0.0, warm, True


def reset_state(scenario: Scenario, placement: Placement, channel_seed: int,
                budget: Optional[InnerBudget] = None,
                warm: Optional[TransmitStrategy] = None) -> MdpState:
    budget = budget or InnerBudget.training()
    channels, rate, strategy, failed = _solve_at(scenario, placement, channel_seed, budget, warm)
    return MdpState(placement=placement, features=state_features(scenario, placement, channels),
                    rate=rate, channel_seed=channel_seed, strategy=strategy,
                    failures=int(failed))


def env_step(scenario: Scenario, state: MdpState, action: Action,
             inner_budget: Optional[InnerBudget] = None,
             a_max: float = RL_MAX_STEP) -> Tuple[MdpState, float]:
    """Move the platform, re-solve the inner problem warm-started, reward the rate change

    A step that leaves the platform where it is (zero action, or a push into the area
    boundary) keeps the state and earns reward 0; the channels are unchanged.
    """
    inner_budget = inner_budget or InnerBudget.training()
    delta = action.clipped(a_max).delta_xy
    placement = Placement(scenario.clip(state.placement.array + delta))
    if placement.xy == state.placement.xy:
        return replace(state, placement=placement), 0.0
    channels, rate, strategy, failed = _solve_at(scenario, placement, state.channel_seed,
                                                 inner_budget, state.strategy)
    next_state = MdpState(placement=placement,
                          features=state_features(scenario, placement, channels),
                          rate=rate, channel_seed=state.channel_seed, strategy=strategy,
                          failures=state.failures + int(failed))
    return next_state, rate - state.rate


@dataclass
class DdpgNets:
    """Actor, critic and their target copies"""
    actor: DenseNet
    critic: DenseNet
    actor_target: DenseNet
    critic_target: DenseNet
    a_max: float

    @classmethod
    def create(cls, state_dim: int, hidden: Tuple[int, ...] = RL_HIDDEN,
               a_max: float = RL_MAX_STEP, seed: int = 0) -> "DdpgNets":
        actor = DenseNet((state_dim, *hidden, 2), "tanh", a_max, seed=seed)
        critic = DenseNet((state_dim + 2, *hidden, 1), "linear", 1.0, seed=seed + 1)
        return cls(actor, critic, actor.copy(), critic.copy(), a_max)

    def q_value(self, states: np.ndarray, actions: np.ndarray, target: bool = False) -> np.ndarray:
        net = self.critic_target if target else self.critic
        return net(critic_input(states, actions, self.a_max))[:, 0]


def critic_input(states: np.ndarray, actions: np.ndarray, a_max: float) -> np.ndarray:
    # actions enter the critic in units of a_max
    return np.hstack([np.atleast_2d(states), np.atleast_2d(actions) / a_max])


def td_targets(batch: Batch, nets: DdpgNets, discount: float = RL_DISCOUNT) -> np.ndarray:
    next_actions = nets.actor_target(batch.next_states)
    return batch.rewards + discount * nets.q_value(batch.next_states, next_actions, target=True)


def critic_loss(batch: Batch, nets: DdpgNets, discount: float = RL_DISCOUNT) -> float:
    """Mean squared TD error against the target networks"""
    targets = td_targets(batch, nets, discount)
    q = nets.q_value(batch.states, batch.actions)
    return float(np.mean((targets - q) ** 2))


def critic_gradient(batch: Batch, nets: DdpgNets,
                    discount: float = RL_DISCOUNT) -> Tuple[float, List[np.ndarray]]:
    """Loss and its gradient with respect to the critic parameters (targets held fixed)"""
    targets = td_targets(batch, nets, discount)
    q = nets.q_value(batch.states, batch.actions)
    residual = targets - q
    grad_q = (-2.0 / len(q)) * residual
    grads, _ = nets.critic.backward(grad_q[:, None])
    return float(np.mean(residual ** 2)), grads


def actor_objective(batch: Batch, nets: DdpgNets) -> float:
    """(1/D) sum_d Q(s_d, mu(s_d))"""
    return float(np.mean(nets.q_value(batch.states, nets.actor(batch.states))))


def actor_gradient(batch: Batch, nets: DdpgNets) -> List[np.ndarray]:
    """Deterministic policy gradient: ascent direction of actor_objective"""
    states = np.atleast_2d(batch.states)
    d = len(states)
    actions = nets.actor(states)
    nets.critic(critic_input(states, actions, nets.a_max))
    _, grad_input = nets.critic.backward(np.full((d, 1), 1.0 / d))
    grad_action = grad_input[:, states.shape[1]:] / nets.a_max
    grads, _ = nets.actor.backward(grad_action)
    return grads


def soft_update(target: DenseNet, source: DenseNet, rho: float = RL_SOFT_UPDATE) -> DenseNet:
    """target <- rho * source + (1 - rho) * target, parameter by parameter"""
    if target.sizes != source.sizes:
        raise SecureArisError(f"network shapes differ: {target.sizes} vs {source.sizes}")
    for t, s in zip(target.parameters(), source.parameters()):
        t *= 1.0 - rho
        t += rho * s
    return target


@dataclass
class TrainingConfig:
    episodes: int = RL_EPISODES
    epochs_per_episode: int = RL_EPOCHS_PER_EPISODE
    buffer_size: int = RL_BUFFER_SIZE
    batch_size: int = RL_BATCH_SIZE
    warmup: int = RL_WARMUP
    actor_lr: float = RL_ACTOR_LR
    critic_lr: float = RL_CRITIC_LR
    discount: float = RL_DISCOUNT
    soft_update: float = RL_SOFT_UPDATE
    hidden: Tuple[int, ...] = RL_HIDDEN
    a_max: float = RL_MAX_STEP
    noise_start: float = RL_NOISE_START
    noise_end: float = RL_NOISE_END
    inner_budget: InnerBudget = field(default_factory=InnerBudget.training)
    final_full_solve: bool = True

    def noise_scale(self, episode: int) -> float:
        """Linear decay of the exploration standard deviation (fraction of a_max)"""
        frac = episode / max(self.episodes - 1, 1)
        return self.noise_start + (self.noise_end - self.noise_start) * frac


@dataclass
class DeploymentPolicy:
    actor: DenseNet
    a_max: float

    def act(self, features: np.ndarray) -> np.ndarray:
        return self.actor(features)[0]

    def save(self, path: Union[str, Path]):
        self.actor.save(path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DeploymentPolicy":
        actor = DenseNet.load(path)
        return cls(actor, actor.output_scale)


@dataclass
class TrainingMetrics:
    episode_returns: List[float] = field(default_factory=list)
    final_rates: List[float] = field(default_factory=list)
    final_placements: List[Tuple[float, float]] = field(default_factory=list)
    critic_losses: List[float] = field(default_factory=list)
    failures: List[int] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "episode": np.arange(len(self.episode_returns)),
            "return": self.episode_returns,
            "final_rate": self.final_rates,
            "x": [p[0] for p in self.final_placements],
            "y": [p[1] for p in self.final_placements],
            "failures": self.failures,
        })


def episode_channel_seed(seed: int, episode: int) -> int:
    return int(np.random.SeedSequence([seed, episode]).generate_state(1)[0])


def _random_placement(scenario: Scenario, rng: np.random.Generator) -> Placement:
    x0, x1, y0, y1 = scenario.area_bounds
    return Placement((float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1))))


def _save_nets(nets: DdpgNets, out_dir: Optional[Path]) -> Optional[str]:
    if out_dir is None:
        return None
    nets.actor.save(out_dir / "actor.ckpt")
    nets.critic.save(out_dir / "critic.ckpt")
    return str(out_dir / "actor.ckpt")


def train(scenario: Scenario, episodes: Optional[int] = None,
          epochs_per_episode: Optional[int] = None, seed: int = DEFAULT_SEED,
          config: Optional[TrainingConfig] = None,
          out_dir: Optional[Union[str, Path]] = None) -> Tuple[DeploymentPolicy, TrainingMetrics]:
    """
    DDPG deployment training
    Each episode starts from a uniform random placement with its own channel seed; after
    the warm-up every environment step triggers one critic step, one actor step and the
    soft target updates.
    """
    config = config or TrainingConfig()
    if episodes is not None:
        config.episodes = episodes
    if epochs_per_episode is not None:
        config.epochs_per_episode = epochs_per_episode
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    dim = feature_dim(scenario)
    nets = DdpgNets.create(dim, config.hidden, config.a_max, seed=seed)
    actor_opt = AdamOptimizer(nets.actor, lr=config.actor_lr)
    critic_opt = AdamOptimizer(nets.critic, lr=config.critic_lr)
    buffer = ReplayBuffer(config.buffer_size, dim, seed=seed)
    metrics = TrainingMetrics()
    full_budget = InnerBudget()

    console.print(f"[cyan]🚁 Training deployment policy: {config.episodes} episodes x "
                  f"{config.epochs_per_episode} epochs[/cyan]")
    with Progress(TextColumn("[progress.description]{task.description}"), BarColumn(),
                  TimeRemainingColumn(), console=console) as progress:
        task = progress.add_task("Training...", total=config.episodes)
        for episode in range(config.episodes):
            channel_seed = episode_channel_seed(seed, episode)
            state = reset_state(scenario, _random_placement(scenario, rng), channel_seed,
                                config.inner_budget)
            sigma = config.noise_scale(episode) * config.a_max
            episode_return = 0.0
            for _ in range(config.epochs_per_episode):
                action = nets.actor(state.features)[0] + rng.normal(0.0, sigma, 2)
                action = np.clip(action, -config.a_max, config.a_max)
                next_state, reward = env_step(scenario, state, Action(action),
                                              config.inner_budget, config.a_max)
                episode_return += reward
                if not np.isfinite(reward):
                    checkpoint = _save_nets(nets, out_dir)
                    raise TrainingDivergedError(f"non-finite reward in episode {episode}",
                                                checkpoint)
                buffer.add(Transition(state.features, action, reward, next_state.features))
                state = next_state

                if len(buffer) >= max(config.warmup, config.batch_size):
                    batch = buffer.sample(config.batch_size)
                    loss, grads = critic_gradient(batch, nets, config.discount)
                    critic_opt.step(grads)
                    # ascent on Q through the actor
                    actor_opt.step([-g for g in actor_gradient(batch, nets)])
                    soft_update(nets.actor_target, nets.actor, config.soft_update)
                    soft_update(nets.critic_target, nets.critic, config.soft_update)
                    metrics.critic_losses.append(loss)

            if not (np.isfinite(episode_return) and nets.actor.is_finite()
                    and nets.critic.is_finite()):
                checkpoint = _save_nets(nets, out_dir)
                raise TrainingDivergedError(f"training diverged in episode {episode}", checkpoint)

            final_rate = state.rate
            if config.final_full_solve:
                _, final_rate, _, _ = _solve_at(scenario, state.placement, channel_seed,
                                                full_budget, state.strategy)
            metrics.episode_returns.append(episode_return)
            metrics.final_rates.append(final_rate)
            metrics.final_placements.append(state.placement.xy)
            metrics.failures.append(state.failures)
            if VERBOSE:
                console.print(f"[dim]  episode {episode}: return {episode_return:+.4f}, "
                              f"final {final_rate:.4f} b/s/Hz at {state.placement.xy}[/dim]")
            progress.advance(task)

    if out_dir is not None:
        _save_nets(nets, out_dir)
        metrics.to_frame().to_csv(out_dir / "training.csv", index=False)
        console.print(f"💾 Checkpoints and training log written to [cyan]{out_dir}[/cyan]")
    return DeploymentPolicy(nets.actor, config.a_max), metrics


def rollout_policy(policy: DeploymentPolicy, scenario: Scenario, start: Placement,
                   steps: int, channel_seed: int,
                   budget: Optional[InnerBudget] = None) -> Tuple[Placement, float, List[Tuple[float, float]]]:
    """Greedy rollout; the final rate is recomputed with the full inner budget"""
    budget = budget or InnerBudget.training()
    state = reset_state(scenario, start, channel_seed, budget)
    path = [state.placement.xy]
    for _ in range(steps):
        state, _ = env_step(scenario, state, Action(policy.act(state.features)), budget,
                            policy.a_max)
        path.append(state.placement.xy)
    _, rate, _, _ = _solve_at(scenario, state.placement, channel_seed, InnerBudget(),
                              state.strategy)
    return state.placement, rate, path


def grid_points(scenario: Scenario, grid_step: float) -> List[Tuple[float, float]]:
    if not grid_step > 0:
        raise SecureArisError("grid_step must be positive")
    x0, x1, y0, y1 = scenario.area_bounds
    xs = np.arange(x0, x1 + 1e-9, grid_step)
    ys = np.arange(y0, y1 + 1e-9, grid_step)
    return [(float(x), float(y)) for x in xs for y in ys]


def _grid_cell(args) -> Tuple[float, float, float]:
    scenario, xy, seed, budget = args
    placement = Placement(xy)
    try:
        channels = build_channels(scenario, placement, seed)
        return xy[0], xy[1], bcd_solve(channels, budget=budget, seed=seed).robust_rate
    except SolverError as e:
        console.print(f"[yellow]Warning: grid cell {xy} failed: {e}[/yellow]")
        return xy[0], xy[1], float("nan")


def grid_search_deploy(scenario: Scenario, grid_step: float, seed: int = DEFAULT_SEED,
                       workers: int = 1, budget: Optional[InnerBudget] = None,
                       points: Optional[List[Tuple[float, float]]] = None
                       ) -> Tuple[Placement, float, pd.DataFrame]:
    """Robust rate over a uniform grid with one common channel seed; returns the argmax

    Failed cells are reported as NaN in the table and never selected.
    """
    points = points if points is not None else grid_points(scenario, grid_step)
    jobs = [(scenario, xy, seed, budget or InnerBudget()) for xy in points]
    rows = []
    console.print(f"[cyan]🔎 Grid search over {len(jobs)} placements ({workers} workers)[/cyan]")
    with Progress(TextColumn("[progress.description]{task.description}"), BarColumn(),
                  TimeRemainingColumn(), console=console) as progress:
        task = progress.add_task("Grid search...", total=len(jobs))
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for row in pool.map(_grid_cell, jobs):
                    rows.append(row)
                    progress.advance(task)
        else:
            for job in jobs:
                rows.append(_grid_cell(job))
                progress.advance(task)

    table = pd.DataFrame(rows, columns=["x", "y", "rate"])
    if table["rate"].isna().all():
        raise SolverError("infeasible", "every grid cell failed")
    best = table["rate"].idxmax()
    placement = Placement((float(table.at[best, "x"]), float(table.at[best, "y"])))
    console.print(f"[green]✅ Best placement {placement.xy}: {table.at[best, 'rate']:.4f} b/s/Hz[/green]")
    return placement, float(table.at[best, "rate"]), table
