"""
Secrecy Evaluation
Nominal SINRs and secrecy rate, adversarial worst-case search over the error balls,
and an exhaustive small-instance oracle
"""
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from rich.console import Console

from .channel import ChannelSet
from .config import *
from .errors import OracleBudgetError

console = Console()

WORST_CASE_LABEL = "upper bound on true worst case"


def _signal(strategy, h_SA: np.ndarray, h_SR: np.ndarray) -> np.ndarray:
    """theta_A^H h_SA + theta_R^H h_SR (broadcast over leading axes of h)"""
    return h_SA @ strategy.theta_A.conj() + h_SR @ strategy.theta_R.conj()


def _jam_vector(strategy, h_J: np.ndarray, H_JR: np.ndarray) -> np.ndarray:
    """h_J + H_JR^H theta_R, so the received jamming power is c^H Z c"""
    return h_J + np.einsum("...nm,n->...m", H_JR.conj(), strategy.theta_R)


def _jam_power(Z: np.ndarray, c: np.ndarray) -> np.ndarray:
    return np.einsum("...m,mp,...p->...", c.conj(), Z, c).real


def sinr_destination(strategy, channels: ChannelSet) -> float:
    s = _signal(strategy, channels.h_SAD, channels.h_SRD)
    jam = _jam_power(strategy.Z, _jam_vector(strategy, channels.h_JD, channels.h_JRD))
    return float(channels.p_src * abs(s) ** 2 / (jam + channels.noise_power))


def sinr_eavesdroppers(strategy, channels: ChannelSet, use_true: bool = True) -> np.ndarray:
    """Per-eavesdropper SINR with the true channels or the estimates"""
    suffix = "" if use_true else "_hat"
    s = _signal(strategy, getattr(channels, "h_SAk" + suffix), getattr(channels, "h_SRk" + suffix))
    c = _jam_vector(strategy, getattr(channels, "h_Jk" + suffix), getattr(channels, "H_JRk" + suffix))
    return channels.p_src * np.abs(s) ** 2 / (_jam_power(strategy.Z, c) + channels.noise_power)


def rate_from_sinr(gamma_D: float, gamma_k: np.ndarray) -> float:
    """[log2(1 + gamma_D) - max_k log2(1 + gamma_k)]^+"""
    return max(0.0, float(np.log2(1.0 + gamma_D) - np.log2(1.0 + np.max(gamma_k))))


def secrecy_rate(strategy, channels: ChannelSet, use_true: bool = True) -> float:
    return rate_from_sinr(sinr_destination(strategy, channels),
                          sinr_eavesdroppers(strategy, channels, use_true))


@dataclass
class SearchBudget:
    samples: int = WORST_CASE_SAMPLES
    seeds: int = WORST_CASE_SEEDS
    steps: int = WORST_CASE_STEPS
    step_fraction: float = WORST_CASE_STEP_FRACTION
    seed: int = 0


@dataclass
class RateReport:
    gamma_D: float
    gamma_k: np.ndarray
    nominal_rate: float
    worst_case_rate: float
    worst_gamma_k: np.ndarray
    worst_error: Dict[str, np.ndarray] = field(default_factory=dict)
    label: str = WORST_CASE_LABEL

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "gamma_D": self.gamma_D,
            "gamma_k": self.gamma_k,
            "nominal_rate": self.nominal_rate,
            "worst_case_rate": self.worst_case_rate,
            "worst_gamma_k": self.worst_gamma_k,
            "worst_error": self.worst_error,
        }


class _EveErrorModel:
    """SINR of one eavesdropper as a function of the four channel errors"""

    def __init__(self, strategy, channels: ChannelSet, k: int):
        self.theta_A = strategy.theta_A
        self.theta_R = strategy.theta_R
        self.Z = strategy.Z
        self.p_src = channels.p_src
        self.noise = channels.noise_power
        self.h_SA = channels.h_SAk_hat[k]
        self.h_SR = channels.h_SRk_hat[k]
        self.h_J = channels.h_Jk_hat[k]
        self.H_JR = channels.H_JRk_hat[k]
        self.radii = {"SAk": channels.r_SAk[k], "SRk": channels.r_SRk[k],
                      "Jk": channels.r_Jk[k], "JRk": channels.r_JRk[k]}
        self.true_error = {x: v[k] for x, v in channels.errors().items()}

    def zero(self, batch: int = 1) -> Dict[str, np.ndarray]:
        return {"SAk": np.zeros((batch,) + self.h_SA.shape, dtype=complex),
                "SRk": np.zeros((batch,) + self.h_SR.shape, dtype=complex),
                "Jk": np.zeros((batch,) + self.h_J.shape, dtype=complex),
                "JRk": np.zeros((batch,) + self.H_JR.shape, dtype=complex)}

    def _parts(self, d):
        s = (self.h_SA + d["SAk"]) @ self.theta_A.conj() + (self.h_SR + d["SRk"]) @ self.theta_R.conj()
        c = (self.h_J + d["Jk"]) + np.einsum("snm,n->sm", (self.H_JR + d["JRk"]).conj(), self.theta_R)
        jam = _jam_power(self.Z, c) + self.noise
        return s, c, jam

    def gamma(self, d: Dict[str, np.ndarray]) -> np.ndarray:
        s, _, jam = self._parts(d)
        return self.p_src * np.abs(s) ** 2 / jam

    def gradient(self, d: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        """Conjugate Wirtinger gradients d gamma / d conj(error)"""
        s, c, jam = self._parts(d)
        zc = c @ self.Z.T
        lead = (self.p_src * s / jam)[:, None]
        drop = (self.p_src * np.abs(s) ** 2 / jam ** 2)[:, None]
        return {
            "SAk": lead * self.theta_A[None, :],
            "SRk": lead * self.theta_R[None, :],
            "Jk": -drop * zc,
            "JRk": -drop[:, :, None] * self.theta_R[None, :, None] * zc.conj()[:, None, :],
        }

    def sample_boundary(self, rng: np.random.Generator, n: int) -> Dict[str, np.ndarray]:
        out = {}
        for name, template in self.zero(1).items():
            shape = (n,) + template.shape[1:]
            g = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
            norms = np.sqrt(np.sum(np.abs(g.reshape(n, -1)) ** 2, axis=1))
            scale = self.radii[name] / np.maximum(norms, 1e-300)
            out[name] = g * scale.reshape((n,) + (1,) * (len(shape) - 1))
        return out

    def project(self, d: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        out = {}
        for name, value in d.items():
            n = value.shape[0]
            norms = np.sqrt(np.sum(np.abs(value.reshape(n, -1)) ** 2, axis=1))
            radius = self.radii[name]
            scale = np.where(norms > radius, radius / np.maximum(norms, 1e-300), 1.0)
            out[name] = value * scale.reshape((n,) + (1,) * (value.ndim - 1))
        return out

    def ascend(self, d: Dict[str, np.ndarray], steps: int, step_fraction: float):
        """Projected normalised-gradient ascent; returns the best point seen per row"""
        best = {k: v.copy() for k, v in d.items()}
        best_gamma = self.gamma(d)
        for _ in range(steps):
            grad = self.gradient(d)
            moved = {}
            for name, value in d.items():
                g = grad[name]
                n = g.shape[0]
                norms = np.sqrt(np.sum(np.abs(g.reshape(n, -1)) ** 2, axis=1))
                direction = g / np.maximum(norms, 1e-300).reshape((n,) + (1,) * (g.ndim - 1))
                moved[name] = value + step_fraction * self.radii[name] * direction
            d = self.project(moved)
            gamma = self.gamma(d)
            better = gamma > best_gamma
            if np.any(better):
                for name in best:
                    best[name][better] = d[name][better]
                best_gamma = np.where(better, gamma, best_gamma)
        return best, best_gamma


def worst_case_rate(strategy, channels: ChannelSet, budget: Optional[SearchBudget] = None) -> RateReport:
    """Adversarial search over the error balls, eavesdropper by eavesdropper

    The reported value is an upper bound on the true worst-case rate: boundary sampling
    followed by projected gradient ascent of each eavesdropper's SINR, seeded from the
    best samples, the zero error and the realised error.
    """
    budget = budget or SearchBudget()
    rng = np.random.default_rng(budget.seed)
    gamma_D = sinr_destination(strategy, channels)
    gamma_k = sinr_eavesdroppers(strategy, channels, use_true=True)
    nominal = rate_from_sinr(gamma_D, gamma_k)

    worst_gamma = gamma_k.copy()
    worst_error = {x: v.copy() for x, v in channels.errors().items()}
    for k in range(channels.n_eves):
        model = _EveErrorModel(strategy, channels, k)
        if all(r == 0 for r in model.radii.values()):
            continue
        samples = model.sample_boundary(rng, budget.samples)
        gamma = model.gamma(samples)
        top = np.argsort(gamma)[::-1][:budget.seeds]
        seeds = {name: np.concatenate([v[top], model.zero(1)[name],
                                       model.true_error[name][None]], axis=0)
                 for name, v in samples.items()}
        best, best_gamma = model.ascend(seeds, budget.steps, budget.step_fraction)
        i = int(np.argmax(best_gamma))
        if best_gamma[i] > worst_gamma[k]:
            worst_gamma[k] = best_gamma[i]
            for name in worst_error:
                worst_error[name][k] = best[name][i]

    worst = min(nominal, rate_from_sinr(gamma_D, worst_gamma))
    if VERBOSE:
        console.print(f"[dim]worst-case search: nominal {nominal:.4f}, worst {worst:.4f} b/s/Hz[/dim]")
    return RateReport(gamma_D=gamma_D, gamma_k=gamma_k, nominal_rate=nominal,
                      worst_case_rate=worst, worst_gamma_k=worst_gamma, worst_error=worst_error)


def exhaustive_oracle(channels: ChannelSet, phase_levels: int, power_levels: int,
                      max_evaluations: float = ORACLE_MAX_EVALUATIONS) -> Tuple[object, float]:
    """Enumerate quantised phases and a jamming-power grid; return the best nominal strategy

    With M > 1 antennas the grid runs over isotropic covariances (p / M) I only, so the
    returned rate is the optimum over that restricted family and a lower bound on the
    optimum over all covariances. With M = 1 the power grid covers every feasible Z.
    """
    from .inner_opt import TransmitStrategy

    n_a, n_r, m = channels.n_aris, channels.n_fixed, channels.n_jam
    n_phase = n_a + n_r
    total = float(phase_levels) ** n_phase * power_levels
    if total > max_evaluations:
        raise OracleBudgetError(
            f"{phase_levels}^{n_phase} x {power_levels} = {total:.3g} evaluations exceeds {max_evaluations:.3g}")

    alphabet = np.exp(2j * np.pi * np.arange(phase_levels) / phase_levels)
    powers = np.linspace(0.0, channels.p_jam_max, power_levels)
    n_combos = phase_levels ** n_phase
    best_rate, best = -np.inf, None
    for start in range(0, n_combos, ORACLE_CHUNK):
        idx = np.arange(start, min(start + ORACLE_CHUNK, n_combos))
        digits = np.array(np.unravel_index(idx, (phase_levels,) * n_phase)).T
        theta = alphabet[digits]
        tA, tR = theta[:, :n_a], theta[:, n_a:]
        s_D = tA.conj() @ channels.h_SAD + tR.conj() @ channels.h_SRD
        c_D = channels.h_JD[None, :] + np.einsum("nm,bn->bm", channels.h_JRD.conj(), tR)
        s_k = (np.einsum("kn,bn->bk", channels.h_SAk, tA.conj())
               + np.einsum("kn,bn->bk", channels.h_SRk, tR.conj()))
        c_k = channels.h_Jk[None] + np.einsum("knm,bn->bkm", channels.H_JRk.conj(), tR)
        # isotropic Z = (p / M) I turns c^H Z c into (p / M) ||c||^2
        g_D = np.sum(np.abs(c_D) ** 2, axis=-1) / m
        g_k = np.sum(np.abs(c_k) ** 2, axis=-1) / m
        for p in powers:
            gamma_D = channels.p_src * np.abs(s_D) ** 2 / (p * g_D + channels.noise_power)
            gamma_k = channels.p_src * np.abs(s_k) ** 2 / (p * g_k + channels.noise_power)
            rate = np.maximum(0.0, np.log2(1 + gamma_D) - np.log2(1 + gamma_k.max(axis=1)))
            i = int(np.argmax(rate))
            if rate[i] > best_rate:
                best_rate = float(rate[i])
                best = TransmitStrategy(theta_A=tA[i].copy(), theta_R=tR[i].copy(),
                                        Z=(p / m) * np.eye(m, dtype=complex))
    return best, best_rate
