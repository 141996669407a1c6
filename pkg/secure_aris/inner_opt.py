"""
Inner Transmit Optimizer
Block coordinate ascent over the jamming covariance, the aerial-RIS phases and the
fixed-RIS phases for a fixed aerial placement, each block solved by successive
convex approximation with lemma-based auxiliary updates
"""
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional

import cvxpy as cp
import numpy as np
from rich.console import Console

from .channel import ChannelSet
from .config import *
from .errors import SolverError
from .robust_lmi import (AuxiliaryVars, LmiBlock, herm_inner, omega_matrix,
                         sign_definiteness_lmi, solve_conic, sproc_jamming_lmi,
                         stacked_channel, xi_matrix)
from .secrecy_eval import secrecy_rate

console = Console()

LN2 = np.log(2.0)


@dataclass
class TransmitStrategy:
    """Phase vectors of both surfaces and the jamming covariance (watts)"""
    theta_A: np.ndarray
    theta_R: np.ndarray
    Z: np.ndarray

    @classmethod
    def random(cls, n_aris: int, n_fixed: int, n_jam: int, p_jam: float,
               rng: np.random.Generator) -> "TransmitStrategy":
        """Uniform phases and isotropic full-power jamming"""
        return cls(theta_A=np.exp(1j * rng.uniform(0, 2 * np.pi, n_aris)),
                   theta_R=np.exp(1j * rng.uniform(0, 2 * np.pi, n_fixed)),
                   Z=(p_jam / n_jam) * np.eye(n_jam, dtype=complex))

    def copy(self) -> "TransmitStrategy":
        return TransmitStrategy(self.theta_A.copy(), self.theta_R.copy(), self.Z.copy())

    def replace(self, **changes) -> "TransmitStrategy":
        values = {"theta_A": self.theta_A, "theta_R": self.theta_R, "Z": self.Z}
        values.update(changes)
        return TransmitStrategy(**values)

    def stacked(self, p_jam: float) -> np.ndarray:
        """[vec(Z / P_J); theta_A; theta_R], the vector watched by the BCD stopping rule"""
        return np.concatenate([(self.Z / p_jam).reshape(-1), self.theta_A, self.theta_R])

    def is_feasible(self, p_jam: float, tol: float = 1e-6) -> bool:
        unit = (np.all(np.abs(np.abs(self.theta_A) - 1) <= tol)
                and np.all(np.abs(np.abs(self.theta_R) - 1) <= tol))
        herm = 0.5 * (self.Z + self.Z.conj().T)
        psd = np.linalg.eigvalsh(herm).min() >= -1e-8 * max(1.0, p_jam)
        budget = np.trace(herm).real <= p_jam * (1 + 1e-8) + 1e-8
        return bool(unit and psd and budget)


def project_unit_modulus(theta: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    """Element-wise projection onto the unit circle; zero entries take the fallback phase"""
    mag = np.abs(theta)
    safe = np.where(mag > 1e-12, theta / np.maximum(mag, 1e-300), fallback / np.abs(fallback))
    return safe


def project_covariance(Z: np.ndarray, p_max: float) -> np.ndarray:
    """Nearest Hermitian PSD matrix with trace at most p_max"""
    herm = 0.5 * (Z + Z.conj().T)
    w, v = np.linalg.eigh(herm)
    w = np.clip(w, 0.0, None)
    if w.sum() > p_max:
        w *= p_max / w.sum()
    return (v * w) @ v.conj().T


@dataclass
class InnerBudget:
    max_outer: int = BCD_MAX_OUTER
    tolerance: float = BCD_TOLERANCE
    sca_rounds: int = SCA_MAX_ROUNDS
    sca_tolerance: float = SCA_TOLERANCE
    lemma_rounds: int = LEMMA_MAX_ROUNDS
    lemma_tolerance: float = LEMMA_TOLERANCE

    @classmethod
    def training(cls) -> "InnerBudget":
        """Reduced budget used inside the deployment environment"""
        return cls(max_outer=RL_INNER_OUTER_ITERS, sca_rounds=RL_INNER_SCA_ROUNDS,
                   lemma_rounds=RL_INNER_LEMMA_ROUNDS)


class BlockResult(NamedTuple):
    solution: np.ndarray
    aux: AuxiliaryVars
    value: float  # b/s/Hz, subproblem objective without penalty
    trace: List[float]
    flags: List[str]


@dataclass
class CertifiedRate:
    robust_rate: float  # b/s/Hz
    psi_S: np.ndarray
    psi_J: np.ndarray
    aux: AuxiliaryVars


@dataclass
class RobustInnerSolution:
    strategy: TransmitStrategy
    aux: AuxiliaryVars
    robust_rate: float
    trace: List[float]
    nominal_rate: float = 0.0
    iterations: int = 0
    flags: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "theta_A": self.strategy.theta_A,
            "theta_R": self.strategy.theta_R,
            "Z": self.strategy.Z,
            "robust_rate": self.robust_rate,
            "nominal_rate": self.nominal_rate,
            "trace": list(self.trace),
            "iterations": self.iterations,
            "flags": list(self.flags),
            "aux": {k: v for k, v in self.aux.__dict__.items()},
        }


def log_upper_bound(x, t: float):
    """t x - log t - 1, an upper bound on log x for t > 0 with equality at t = 1 / x"""
    return t * x - np.log(t) - 1


def _log(x):
    return cp.log(x) if isinstance(x, cp.Expression) else np.log(x)


def rate_surrogate(signal, jam, psi_jam, t: float):
    """log(signal + jam + 1) - log_upper_bound(psi_jam + 1, t), in nats

    Lower-bounds log(1 + |s|^2 / (J + 1)) whenever signal <= |s|^2, jam <= J <= psi_jam;
    equal to it when all three are tight and t = 1 / (J + 1).
    """
    return _log(signal + jam + 1) - log_upper_bound(psi_jam + 1, t)


def eve_rate_bound(psi_S, psi_J, t: float):
    """Upper bound on log(1 + psi_S / (psi_J + 1)), tight at t = 1 / (psi_S + psi_J + 1)"""
    return log_upper_bound(psi_S + psi_J + 1, t) - _log(psi_J + 1)


def jamming_lower_bound(c, c0: np.ndarray, Zbar: np.ndarray):
    """2 Re{c0^H Z c} - c0^H Z c0, below c^H Z c for PSD Z and tight at c = c0"""
    zc0 = Zbar @ c0
    re = cp.real if isinstance(c, cp.Expression) else np.real
    return 2 * re(zc0.conj() @ c) - np.vdot(c0, zc0).real


class _EveVariables:
    """Shared eavesdropper epigraph: psi, multipliers and the max-rate variable phi"""

    def __init__(self, n_eves: int):
        self.psi_S = cp.Variable(n_eves, name="psi_S")
        self.psi_J = cp.Variable(n_eves, name="psi_J")
        self.rho1 = cp.Variable(n_eves, name="rho1")
        self.rho2 = cp.Variable(n_eves, name="rho2")
        self.eta1 = cp.Variable(n_eves, name="eta1")
        self.eta2 = cp.Variable(n_eves, name="eta2")
        self.phi = cp.Variable(name="phi")

    def build(self, cs: ChannelSet, theta_A, theta_R, omega, t_k: Optional[np.ndarray]):
        blocks: List[LmiBlock] = []
        constraints = [self.rho1 >= 0, self.rho2 >= 0, self.eta1 >= 0, self.eta2 >= 0,
                       self.psi_J >= 0, self.phi >= 0]
        for k in range(cs.n_eves):
            blocks.append(sign_definiteness_lmi(
                theta_A, theta_R, self.psi_S[k], self.rho1[k], self.rho2[k],
                cs.h_SAk_hat[k], cs.h_SRk_hat[k], cs.eps_SAk[k], cs.eps_SRk[k],
                label=f"sign-definiteness[{k}]"))
            h_tilde = stacked_channel(cs.h_Jk_hat[k], cs.H_JRk_hat[k])
            blocks.append(sproc_jamming_lmi(
                omega, self.eta1[k], self.eta2[k], self.psi_J[k], cs.h_Jk_hat[k],
                cs.H_JRk_hat[k], cs.eps_Jk[k], cs.eps_JRk[k], label=f"s-procedure[{k}]",
                scale=max(1.0, float(np.vdot(h_tilde, h_tilde).real))))
            if t_k is None:
                continue
            constraints.append(eve_rate_bound(self.psi_S[k], self.psi_J[k], t_k[k]) <= self.phi)
        return blocks, constraints

    def t_update(self) -> np.ndarray:
        return 1.0 / (np.maximum(self.psi_S.value, 0) + np.maximum(self.psi_J.value, 0) + 1.0)

    def eve_rate(self) -> float:
        """max_k log(1 + psi_S / (psi_J + 1)) in nats at the current values"""
        psi_S = np.maximum(self.psi_S.value, 0)
        psi_J = np.maximum(self.psi_J.value, 0)
        return float(np.max(np.log1p(psi_S / (psi_J + 1.0))))

    def fill(self, aux: AuxiliaryVars):
        aux.psi_S = np.asarray(self.psi_S.value, dtype=float).copy()
        aux.psi_J = np.asarray(self.psi_J.value, dtype=float).copy()
        aux.rho1 = np.asarray(self.rho1.value, dtype=float).copy()
        aux.rho2 = np.asarray(self.rho2.value, dtype=float).copy()
        aux.eta1 = np.asarray(self.eta1.value, dtype=float).copy()
        aux.eta2 = np.asarray(self.eta2.value, dtype=float).copy()
        aux.phi = float(self.phi.value)


def _jam_vector_dest(cs: ChannelSet, theta_R):
    """h_JD + h_JRD^H theta_R"""
    if isinstance(theta_R, cp.Expression):
        return cs.h_JD + cs.h_JRD.conj().T @ theta_R
    return cs.h_JD + cs.h_JRD.conj().T @ np.asarray(theta_R)


def _nominal_t_k(cs: ChannelSet, theta_A, theta_R, Zbar) -> np.ndarray:
    """Lemma auxiliaries evaluated with the estimates, used as a cold start"""
    s = cs.h_SAk_hat @ theta_A.conj() + cs.h_SRk_hat @ theta_R.conj()
    c = cs.h_Jk_hat + np.einsum("knm,n->km", cs.H_JRk_hat.conj(), theta_R)
    jam = np.einsum("km,mp,kp->k", c.conj(), Zbar, c).real
    return 1.0 / (np.abs(s) ** 2 + jam + 1.0)


def _check_ascent(trace: List[float], flags: List[str], name: str):
    if len(trace) >= 2 and trace[-1] < trace[-2] - ASCENT_SLACK * max(1.0, abs(trace[-2])):
        message = f"{name}: objective decreased {trace[-2]:.6g} -> {trace[-1]:.6g}"
        flags.append(message)
        if VERBOSE:
            console.print(f"[yellow]Warning: {message}[/yellow]")


def solve_jamming(channels: ChannelSet, theta_A: np.ndarray, theta_R: np.ndarray,
                  warm_aux: Optional[AuxiliaryVars] = None, Z0: Optional[np.ndarray] = None,
                  budget: Optional[InnerBudget] = None, normalized: bool = False,
                  dump_path: Optional[str] = None) -> BlockResult:
    """Jamming covariance block: concave surrogate in Z with t_JD / t_k lemma updates

    Returns Z in watts (or in units of P_J when normalized=True).
    """
    budget = budget or InnerBudget()
    cs = channels if normalized else channels.normalized()
    p_jam = 1.0 if normalized else channels.p_jam_max
    m = cs.n_jam
    Zbar0 = (np.eye(m) / m) if Z0 is None else np.asarray(Z0) / p_jam
    s_D = herm_inner(theta_A, cs.h_SAD) + herm_inner(theta_R, cs.h_SRD)
    c_D = _jam_vector_dest(cs, theta_R)
    aux = warm_aux.copy() if warm_aux is not None else AuxiliaryVars.initial(cs.n_eves)
    if warm_aux is None:
        aux.t_JD = 1.0 / (np.vdot(c_D, Zbar0 @ c_D).real + 1.0)
        aux.t_k = _nominal_t_k(cs, theta_A, theta_R, Zbar0)

    Z = cp.Variable((m, m), hermitian=True, name="Z")
    eve = _EveVariables(cs.n_eves)
    jam_D = cp.real(cp.sum(cp.multiply(c_D.conj(), Z @ c_D)))
    omega = omega_matrix(theta_R, Z)
    trace, flags = [], []
    Zbar = Zbar0
    for _ in range(budget.lemma_rounds):
        blocks, constraints = eve.build(cs, theta_A, theta_R, omega, aux.t_k)
        blocks.append(LmiBlock("jamming-covariance", Z))
        constraints.append(cp.real(cp.trace(Z)) <= 1.0)
        objective = rate_surrogate(abs(s_D) ** 2, jam_D, jam_D, aux.t_JD) - eve.phi
        result = solve_conic(objective, blocks, constraints, dump_path=dump_path)
        result.raise_for_status("jamming covariance subproblem")
        dump_path = None
        Zbar = project_covariance(np.asarray(Z.value), 1.0)
        jam_value = np.vdot(c_D, Zbar @ c_D).real
        value = float(np.log1p(abs(s_D) ** 2 / (jam_value + 1)) - eve.eve_rate())
        trace.append(value)
        _check_ascent(trace, flags, "jamming")
        aux.t_JD = 1.0 / (jam_value + 1.0)
        aux.t_k = eve.t_update()
        if len(trace) >= 2 and abs(trace[-1] - trace[-2]) < budget.lemma_tolerance * max(1.0, abs(trace[-1])):
            break
    eve.fill(aux)
    return BlockResult(Zbar * p_jam, aux, trace[-1] / LN2, [v / LN2 for v in trace], flags)


def _modulus_penalty(theta: cp.Variable, theta0: np.ndarray, iota: cp.Variable) -> list:
    """|theta_n|^2 <= 1 + iota_n and 2 Re{theta0_n^* theta_n} - |theta0_n|^2 >= 1 - iota_{N+n}"""
    n = theta0.size
    return [
        cp.square(cp.abs(theta)) <= 1 + iota[:n],
        1 - (2 * cp.real(cp.multiply(theta0.conj(), theta)) - np.abs(theta0) ** 2) <= iota[n:],
        iota >= 0,
    ]


def phi_lower_bound(u, u0: complex, g: complex):
    """|g|^2 + 2Re{g^* u} + 2Re{u0^* u} - |u0|^2, a lower bound on |u + g|^2 tight at u = u0"""
    if isinstance(u, cp.Expression):
        return abs(g) ** 2 + 2 * cp.real(np.conj(g) * u) + 2 * cp.real(np.conj(u0) * u) - abs(u0) ** 2
    return abs(g) ** 2 + 2 * np.real(np.conj(g) * u) + 2 * np.real(np.conj(u0) * u) - abs(u0) ** 2


class _PenaltySchedule:
    """Penalty weight doubling whenever the SCA converges with residual modulus slack"""

    def __init__(self):
        self.weight = PENALTY_INITIAL

    def escalate(self, slack: float) -> bool:
        if slack <= PENALTY_SLACK_TOLERANCE or self.weight >= PENALTY_MAX:
            return False
        self.weight = min(self.weight * PENALTY_GROWTH, PENALTY_MAX)
        return True


def _phase_sca(cs: ChannelSet, theta0: np.ndarray, build, aux: AuxiliaryVars,
               budget: InnerBudget, name: str, dump_path=None):
    """Shared SCA driver for both surfaces

    build(theta, theta0, aux) -> (objective_without_penalty, blocks, constraints, after)
    where after(value_holder) updates the lemma auxiliaries after a solve.
    """
    n = theta0.size
    theta = cp.Variable(n, complex=True, name=f"theta_{name}")
    iota = cp.Variable(2 * n, name=f"iota_{name}")
    penalty = _PenaltySchedule()
    trace, flags = [], []
    segment: List[float] = []
    last_value = 0.0
    current = theta0.copy()
    for _ in range(budget.sca_rounds):
        objective, blocks, constraints, after = build(theta, current, aux)
        constraints = constraints + _modulus_penalty(theta, current, iota)
        result = solve_conic(objective - penalty.weight * cp.sum(iota), blocks, constraints,
                             dump_path=dump_path)
        result.raise_for_status(f"{name} phase subproblem")
        dump_path = None
        candidate = np.asarray(theta.value)
        value = after()
        last_value = value
        trace.append(value - penalty.weight * float(np.sum(iota.value)))
        segment.append(trace[-1])
        _check_ascent(segment, flags, name)
        step = np.linalg.norm(candidate - current)
        current = candidate
        if step < budget.sca_tolerance:
            if penalty.escalate(float(np.sum(np.maximum(iota.value, 0)))):
                segment = []
                continue
            break
    slack = float(np.sum(np.maximum(iota.value, 0))) if iota.value is not None else 0.0
    if slack > PENALTY_SLACK_TOLERANCE:
        flags.append(f"{name}: modulus slack {slack:.2e} after penalty escalation")
    if name == "A":
        aux.iota_A = np.maximum(np.asarray(iota.value, dtype=float), 0)
    else:
        aux.iota_R = np.maximum(np.asarray(iota.value, dtype=float), 0)
    return project_unit_modulus(current, theta0), trace, flags, last_value


def solve_aris_phases(channels: ChannelSet, Z: np.ndarray, theta_R: np.ndarray,
                      theta_A0: np.ndarray, warm_aux: Optional[AuxiliaryVars] = None,
                      budget: Optional[InnerBudget] = None, normalized: bool = False,
                      dump_path: Optional[str] = None) -> BlockResult:
    """Aerial-RIS phase block (SCA on the linearised received signal power)"""
    budget = budget or InnerBudget()
    cs = channels if normalized else channels.normalized()
    Zbar = np.asarray(Z) / (1.0 if normalized else channels.p_jam_max)
    g = herm_inner(theta_R, cs.h_SRD)
    c_D = _jam_vector_dest(cs, theta_R)
    jam_D = float(np.vdot(c_D, Zbar @ c_D).real)
    omega = omega_matrix(theta_R, Zbar)
    aux = warm_aux.copy() if warm_aux is not None else AuxiliaryVars.initial(cs.n_eves)
    if warm_aux is None:
        aux.t_k = _nominal_t_k(cs, theta_A0, theta_R, Zbar)
    eve = _EveVariables(cs.n_eves)

    def build(theta, current, aux):
        u = herm_inner(theta, cs.h_SAD)
        u0 = herm_inner(current, cs.h_SAD)
        phi_A = phi_lower_bound(u, u0, g)
        blocks, constraints = eve.build(cs, theta, theta_R, omega, aux.t_k)
        objective = cp.log(1 + phi_A / (jam_D + 1)) - eve.phi

        def after():
            s = g + herm_inner(np.asarray(theta.value), cs.h_SAD)
            value = float(np.log1p(abs(s) ** 2 / (jam_D + 1)) - eve.eve_rate())
            aux.t_k = eve.t_update()
            return value

        return objective, blocks, constraints, after

    theta_A, trace, flags, value = _phase_sca(cs, theta_A0, build, aux, budget, "A", dump_path)
    eve.fill(aux)
    return BlockResult(theta_A, aux, value / LN2,
                       [v / LN2 for v in trace], flags)


def _factor(Zbar: np.ndarray) -> np.ndarray:
    """L with L L^H = Z for Hermitian PSD Z (singular Z allowed)"""
    w, v = np.linalg.eigh(0.5 * (Zbar + Zbar.conj().T))
    return v * np.sqrt(np.clip(w, 0.0, None))


def solve_fixed_phases(channels: ChannelSet, Z: np.ndarray, theta_A: np.ndarray,
                       theta_R0: np.ndarray, warm_aux: Optional[AuxiliaryVars] = None,
                       budget: Optional[InnerBudget] = None, normalized: bool = False,
                       dump_path: Optional[str] = None) -> BlockResult:
    """Fixed-RIS phase block

    Received jamming at D is bounded above by psi_JD through a Schur block on a factor of
    Z, the jamming S-procedure uses the linearised Kronecker operator.
    """
    budget = budget or InnerBudget()
    cs = channels if normalized else channels.normalized()
    Zbar = np.asarray(Z) / (1.0 if normalized else channels.p_jam_max)
    m = cs.n_jam
    L = _factor(Zbar)
    g = herm_inner(theta_A, cs.h_SAD)
    aux = warm_aux.copy() if warm_aux is not None else AuxiliaryVars.initial(cs.n_eves)
    if warm_aux is None:
        c0 = _jam_vector_dest(cs, theta_R0)
        aux.t_RD = 1.0 / (np.vdot(c0, Zbar @ c0).real + 1.0)
        aux.t_k = _nominal_t_k(cs, theta_A, theta_R0, Zbar)
    eve = _EveVariables(cs.n_eves)
    psi_JD = cp.Variable(name="psi_JD")

    def build(theta, current, aux):
        u = herm_inner(theta, cs.h_SRD)
        u0 = herm_inner(current, cs.h_SRD)
        phi_R = phi_lower_bound(u, u0, g)
        c = _jam_vector_dest(cs, theta)
        c0 = _jam_vector_dest(cs, current)
        jam_lin = jamming_lower_bound(c, c0, Zbar)
        row = cp.reshape(cp.conj(c) @ L, (1, m), order="C")
        schur = LmiBlock("jamming-at-destination", cp.bmat([
            [cp.reshape(psi_JD, (1, 1), order="C"), row],
            [cp.conj(row).T, cp.Constant(np.eye(m))]]))
        xi = xi_matrix(theta, current, Zbar)
        blocks, constraints = eve.build(cs, theta_A, theta, xi, aux.t_k)
        blocks.append(schur)
        constraints.append(psi_JD >= 0)
        objective = rate_surrogate(phi_R, jam_lin, psi_JD, aux.t_RD) - eve.phi

        def after():
            theta_v = np.asarray(theta.value)
            cv = _jam_vector_dest(cs, theta_v)
            jam_true = float(np.vdot(cv, Zbar @ cv).real)
            s = g + herm_inner(theta_v, cs.h_SRD)
            value = float(np.log1p(abs(s) ** 2 / (jam_true + 1)) - eve.eve_rate())
            aux.t_RD = 1.0 / (float(psi_JD.value) + 1.0)
            aux.psi_JD = float(psi_JD.value)
            aux.t_k = eve.t_update()
            return value

        return objective, blocks, constraints, after

    theta_R, trace, flags, value = _phase_sca(cs, theta_R0, build, aux, budget, "R", dump_path)
    eve.fill(aux)
    return BlockResult(theta_R, aux, value / LN2,
                       [v / LN2 for v in trace], flags)


def certify_strategy(strategy: TransmitStrategy, channels: ChannelSet) -> CertifiedRate:
    """Certified robust secrecy rate of a fixed strategy

    psi_S is minimised and psi_J maximised per eavesdropper under the robust LMIs, so the
    result is a lower bound on the rate under every admissible channel error.
    """
    cs = channels.normalized()
    Zbar = strategy.Z / channels.p_jam_max
    eve = _EveVariables(cs.n_eves)
    omega = omega_matrix(strategy.theta_R, Zbar)
    blocks, constraints = eve.build(cs, strategy.theta_A, strategy.theta_R, omega, None)
    result = solve_conic(cp.sum(eve.psi_S - eve.psi_J), blocks, constraints, maximize=False)
    result.raise_for_status("certification")
    psi_S = np.maximum(np.asarray(eve.psi_S.value, dtype=float), 0)
    psi_J = np.maximum(np.asarray(eve.psi_J.value, dtype=float), 0)
    s_D = herm_inner(strategy.theta_A, cs.h_SAD) + herm_inner(strategy.theta_R, cs.h_SRD)
    c_D = _jam_vector_dest(cs, strategy.theta_R)
    gamma_D = abs(s_D) ** 2 / (np.vdot(c_D, Zbar @ c_D).real + 1.0)
    eve_rate = np.log2(1 + psi_S / (psi_J + 1))
    rate = max(0.0, float(np.log2(1 + gamma_D) - eve_rate.max()))
    aux = AuxiliaryVars.initial(cs.n_eves)
    eve.fill(aux)
    aux.psi_S, aux.psi_J = psi_S, psi_J
    aux.phi = float(eve_rate.max() * LN2)
    aux.t_k = 1.0 / (psi_S + psi_J + 1.0)
    return CertifiedRate(robust_rate=rate, psi_S=psi_S, psi_J=psi_J, aux=aux)


def bcd_solve(channels: ChannelSet, init: Optional[TransmitStrategy] = None,
              max_outer: Optional[int] = None, tolerance: Optional[float] = None,
              budget: Optional[InnerBudget] = None, jamming: bool = True, seed: int = 0,
              dump_path: Optional[str] = None) -> RobustInnerSolution:
    """Cycle jamming -> aerial-RIS -> fixed-RIS blocks until the stacked variables settle

    A block result is kept only when its certified robust rate does not fall below the
    current one, so the trace is nondecreasing. Disabled surfaces (see ChannelSet) and
    jamming=False skip their blocks; without jamming Z stays zero.
    """
    budget = budget or InnerBudget()
    max_outer = budget.max_outer if max_outer is None else max_outer
    tolerance = budget.tolerance if tolerance is None else tolerance
    rng = np.random.default_rng(seed)
    p_jam = channels.p_jam_max
    attempts = 0
    while True:
        start = init.copy() if (init is not None and attempts == 0) else TransmitStrategy.random(
            channels.n_aris, channels.n_fixed, channels.n_jam, p_jam, rng)
        if not jamming:
            start.Z = np.zeros_like(start.Z)
        try:
            return _bcd_from(channels, start, max_outer, tolerance, budget, jamming, dump_path)
        except SolverError as e:
            attempts += 1
            if attempts > INIT_RETRIES:
                raise SolverError(e.status, f"first BCD iteration failed after {INIT_RETRIES} "
                                            f"random restarts", e.block) from e
            console.print(f"[yellow]Warning: first BCD iteration failed ({e}); "
                          f"restart {attempts}/{INIT_RETRIES}[/yellow]")


def _bcd_from(channels: ChannelSet, strategy: TransmitStrategy, max_outer: int,
              tolerance: float, budget: InnerBudget, jamming: bool, dump_path) -> RobustInnerSolution:
    p_jam = channels.p_jam_max
    certified = certify_strategy(strategy, channels)
    value = certified.robust_rate
    trace = [value]
    flags: List[str] = []
    states: Dict[str, Optional[AuxiliaryVars]] = {"jamming": None, "aris": None, "fixed": None}
    blocks = []
    if jamming:
        blocks.append("jamming")
    if channels.aris_enabled:
        blocks.append("aris")
    if channels.fixed_ris_enabled:
        blocks.append("fixed")

    iterations = 0
    for outer in range(max_outer):
        iterations = outer + 1
        previous = strategy.stacked(p_jam)
        for name in blocks:
            try:
                if name == "jamming":
                    res = solve_jamming(channels, strategy.theta_A, strategy.theta_R,
                                        states[name], Z0=strategy.Z, budget=budget,
                                        dump_path=dump_path)
                    candidate = strategy.replace(Z=res.solution)
                elif name == "aris":
                    res = solve_aris_phases(channels, strategy.Z, strategy.theta_R,
                                            strategy.theta_A, states[name], budget=budget,
                                            dump_path=dump_path)
                    candidate = strategy.replace(theta_A=res.solution)
                else:
                    res = solve_fixed_phases(channels, strategy.Z, strategy.theta_A,
                                             strategy.theta_R, states[name], budget=budget,
                                             dump_path=dump_path)
                    candidate = strategy.replace(theta_R=res.solution)
                dump_path = None
                cert = certify_strategy(candidate, channels)
            except SolverError as e:
                if outer == 0 and name == blocks[0]:
                    raise
                flags.append(f"outer {outer}: {name} block failed: {e}")
                console.print(f"[yellow]Warning: {name} block failed at outer iteration {outer}: {e}[/yellow]")
                continue
            states[name] = res.aux
            flags.extend(res.flags)
            if cert.robust_rate >= value:
                strategy, value, certified = candidate, cert.robust_rate, cert
            if VERBOSE:
                console.print(f"[dim]  outer {outer} {name}: {cert.robust_rate:.5f} b/s/Hz[/dim]")
        trace.append(value)
        if np.linalg.norm(strategy.stacked(p_jam) - previous) < tolerance:
            break

    aux = certified.aux
    if states["jamming"] is not None:
        aux.t_JD = states["jamming"].t_JD
    if states["fixed"] is not None:
        aux.t_RD = states["fixed"].t_RD
        aux.psi_JD = states["fixed"].psi_JD
        aux.iota_R = states["fixed"].iota_R
    if states["aris"] is not None:
        aux.iota_A = states["aris"].iota_A
    return RobustInnerSolution(strategy=strategy, aux=aux, robust_rate=value, trace=trace,
                               nominal_rate=secrecy_rate(strategy, channels, use_true=True),
                               iterations=iterations, flags=flags)
