"""
Channel Synthesis Engine
Rician link channels as a function of the aerial placement, cascaded reflection
channels, and norm-bounded eavesdropper estimates
"""
import dataclasses
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from rich.console import Console

from .config import *
from .errors import ChannelError
from .scenario import Placement, Scenario

console = Console()

EVE_LINKS = ("SAk", "SRk", "Jk", "JRk")


def path_loss(distance: float, exponent: float, pl_ref: float) -> float:
    """Linear power gain pl_ref * (d / d0)^-alpha"""
    if distance <= 1e-9:
        raise ChannelError("colocated nodes: link distance is zero")
    return pl_ref * (distance / REFERENCE_DISTANCE) ** (-exponent)


def steering_vector(n: int, origin: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Half-wavelength ULA response along the x axis, toward target"""
    direction = np.asarray(target, dtype=float) - np.asarray(origin, dtype=float)
    cos_angle = direction[0] / np.linalg.norm(direction)
    return np.exp(1j * np.pi * np.arange(n) * cos_angle)


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def rician_link(los: np.ndarray, distance: float, exponent: float, kappa: float,
                pl_ref: float, rng: np.random.Generator) -> np.ndarray:
    """sqrt(PL) * (sqrt(k/(1+k)) a_LOS + sqrt(1/(1+k)) g)"""
    scatter = complex_normal(rng, los.shape)
    return np.sqrt(path_loss(distance, exponent, pl_ref)) * (
        np.sqrt(kappa / (1.0 + kappa)) * los + np.sqrt(1.0 / (1.0 + kappa)) * scatter)


@dataclass(frozen=True)
class RawChannels:
    """Primitive link channels before cascading"""
    h_SA: np.ndarray   # (N_A,)
    h_AD: np.ndarray   # (N_A,)
    h_SR: np.ndarray   # (N_R,)
    h_RD: np.ndarray   # (N_R,)
    h_Ak: np.ndarray   # (K, N_A)
    h_Rk: np.ndarray   # (K, N_R)
    H_JR: np.ndarray   # (N_R, M)
    h_JD: np.ndarray   # (M,)
    h_Jk: np.ndarray   # (K, M)
    p_src: float
    p_jam_max: float
    noise_power: float


@dataclass(frozen=True)
class ChannelSet:
    """Cascaded channels; eavesdropper links carry (true, estimate, radius)"""
    h_SAD: np.ndarray        # (N_A,)
    h_SRD: np.ndarray        # (N_R,)
    h_JRD: np.ndarray        # (N_R, M)
    h_JD: np.ndarray         # (M,)
    h_SAk: np.ndarray        # (K, N_A) true
    h_SRk: np.ndarray        # (K, N_R) true
    h_Jk: np.ndarray         # (K, M) true
    H_JRk: np.ndarray        # (K, N_R, M) true
    h_SAk_hat: np.ndarray
    h_SRk_hat: np.ndarray
    h_Jk_hat: np.ndarray
    H_JRk_hat: np.ndarray
    r_SAk: np.ndarray        # (K,) ball radii, ||true - estimate|| <= r
    r_SRk: np.ndarray
    r_Jk: np.ndarray
    r_JRk: np.ndarray
    p_src: float
    p_jam_max: float
    noise_power: float
    aris_enabled: bool = True
    fixed_ris_enabled: bool = True

    @property
    def n_aris(self) -> int:
        return self.h_SAD.shape[0]

    @property
    def n_fixed(self) -> int:
        return self.h_SRD.shape[0]

    @property
    def n_jam(self) -> int:
        return self.h_JD.shape[0]

    @property
    def n_eves(self) -> int:
        return self.h_SAk.shape[0]

    # squared-norm bounds ||Delta||^2 <= eps, as consumed by the robust LMIs
    @property
    def eps_SAk(self) -> np.ndarray:
        return self.r_SAk ** 2

    @property
    def eps_SRk(self) -> np.ndarray:
        return self.r_SRk ** 2

    @property
    def eps_Jk(self) -> np.ndarray:
        return self.r_Jk ** 2

    @property
    def eps_JRk(self) -> np.ndarray:
        return self.r_JRk ** 2

    @property
    def has_uncertainty(self) -> bool:
        return any(np.any(getattr(self, f"r_{x}") > 0) for x in EVE_LINKS)

    def replace(self, **changes) -> "ChannelSet":
        return dataclasses.replace(self, **changes)

    def errors(self) -> Dict[str, np.ndarray]:
        """Actual error realisation true - estimate per uncertain link"""
        return {
            "SAk": self.h_SAk - self.h_SAk_hat,
            "SRk": self.h_SRk - self.h_SRk_hat,
            "Jk": self.h_Jk - self.h_Jk_hat,
            "JRk": self.H_JRk - self.H_JRk_hat,
        }

    def normalized(self) -> "ChannelSet":
        """Noise-normalised copy: P_S = P_J = sigma^2 = 1, jamming covariance in units of P_J"""
        sig = np.sqrt(self.p_src / self.noise_power)
        jam = np.sqrt(self.p_jam_max / self.noise_power)
        return dataclasses.replace(
            self,
            h_SAD=self.h_SAD * sig, h_SRD=self.h_SRD * sig,
            h_JRD=self.h_JRD * jam, h_JD=self.h_JD * jam,
            h_SAk=self.h_SAk * sig, h_SRk=self.h_SRk * sig,
            h_Jk=self.h_Jk * jam, H_JRk=self.H_JRk * jam,
            h_SAk_hat=self.h_SAk_hat * sig, h_SRk_hat=self.h_SRk_hat * sig,
            h_Jk_hat=self.h_Jk_hat * jam, H_JRk_hat=self.H_JRk_hat * jam,
            r_SAk=self.r_SAk * sig, r_SRk=self.r_SRk * sig,
            r_Jk=self.r_Jk * jam, r_JRk=self.r_JRk * jam,
            p_src=1.0, p_jam_max=1.0, noise_power=1.0,
        )

    def without_uncertainty(self) -> "ChannelSet":
        """Treat the estimates as exact (design-side view of the non-robust scheme)"""
        zero = np.zeros(self.n_eves)
        return dataclasses.replace(
            self, h_SAk=self.h_SAk_hat, h_SRk=self.h_SRk_hat, h_Jk=self.h_Jk_hat,
            H_JRk=self.H_JRk_hat, r_SAk=zero, r_SRk=zero, r_Jk=zero, r_JRk=zero)

    def with_uncertainty(self, delta: float) -> "ChannelSet":
        """Re-size the error balls around the same estimates"""
        if delta < 0:
            raise ChannelError("uncertainty coefficient must be non-negative")
        return dataclasses.replace(
            self,
            r_SAk=delta * np.linalg.norm(self.h_SAk_hat, axis=1),
            r_SRk=delta * np.linalg.norm(self.h_SRk_hat, axis=1),
            r_Jk=delta * np.linalg.norm(self.h_Jk_hat, axis=1),
            r_JRk=delta * np.linalg.norm(self.H_JRk_hat.reshape(self.n_eves, -1), axis=1),
        )

    def without_aris(self) -> "ChannelSet":
        """Remove every ARIS-reflected path"""
        zero_k = np.zeros(self.n_eves)
        return dataclasses.replace(
            self, h_SAD=np.zeros_like(self.h_SAD), h_SAk=np.zeros_like(self.h_SAk),
            h_SAk_hat=np.zeros_like(self.h_SAk_hat), r_SAk=zero_k, aris_enabled=False)

    def without_fixed_ris(self) -> "ChannelSet":
        """Remove every fixed-RIS-reflected path (signal and jamming)"""
        zero_k = np.zeros(self.n_eves)
        return dataclasses.replace(
            self, h_SRD=np.zeros_like(self.h_SRD), h_JRD=np.zeros_like(self.h_JRD),
            h_SRk=np.zeros_like(self.h_SRk), H_JRk=np.zeros_like(self.H_JRk),
            h_SRk_hat=np.zeros_like(self.h_SRk_hat), H_JRk_hat=np.zeros_like(self.H_JRk_hat),
            r_SRk=zero_k, r_JRk=zero_k, fixed_ris_enabled=False)

    def eavesdropper(self, k: int) -> "ChannelSet":
        """Restrict to a single eavesdropper"""
        sl = slice(k, k + 1)
        fields = {}
        for name in ("h_SAk", "h_SRk", "h_Jk", "H_JRk"):
            fields[name] = getattr(self, name)[sl]
            fields[name + "_hat"] = getattr(self, name + "_hat")[sl]
        for x in EVE_LINKS:
            fields[f"r_{x}"] = getattr(self, f"r_{x}")[sl]
        return dataclasses.replace(self, **fields)


def synthesize(scenario: Scenario, placement: Placement, seed: int) -> RawChannels:
    """Draw all link channels for the given aerial placement

    Small-scale scattering depends only on the seed, so two placements with the same
    seed differ only through path loss and line-of-sight geometry.
    """
    scenario.check_placement(placement)
    pos = scenario.positions_3d(placement)
    rng = np.random.default_rng(seed)
    los_rng = np.random.default_rng([seed, 7])
    n_a, n_r, m, k = scenario.n_aris, scenario.n_fixed, scenario.n_jam_antennas, scenario.n_eves

    def los(n, origin, target):
        if scenario.los_model == "random":
            return np.exp(1j * los_rng.uniform(0.0, 2 * np.pi, n))
        return steering_vector(n, origin, target)

    def link(n, array_pos, other_pos, exponent, kappa):
        d = float(np.linalg.norm(np.asarray(array_pos) - np.asarray(other_pos)))
        if d <= 1e-9:
            raise ChannelError(f"colocated nodes at {np.asarray(array_pos).tolist()}")
        return rician_link(los(n, array_pos, other_pos), d, exponent, kappa, scenario.pl_ref, rng)

    kr, ka = scenario.rician_fixed, scenario.rician_aris
    ple_r, ple_a, ple_air = scenario.ple_fixed, scenario.ple_aris, scenario.ple_air

    h_SA = link(n_a, pos["A"], pos["S"], ple_a, ka)
    h_AD = link(n_a, pos["A"], pos["D"], ple_a, ka)
    h_SR = link(n_r, pos["R"], pos["S"], ple_r, kr)
    h_RD = link(n_r, pos["R"], pos["D"], ple_r, kr)
    h_Ak = np.array([link(n_a, pos["A"], e, ple_a, ka) for e in pos["E"]]).reshape(k, n_a)
    h_Rk = np.array([link(n_r, pos["R"], e, ple_r, kr) for e in pos["E"]]).reshape(k, n_r)

    # jammer to fixed RIS: arrival at R times departure at J
    d_jr = float(np.linalg.norm(pos["J"] - pos["R"]))
    if scenario.los_model == "random":
        los_jr = np.exp(1j * los_rng.uniform(0.0, 2 * np.pi, (n_r, m)))
    else:
        los_jr = np.outer(steering_vector(n_r, pos["R"], pos["J"]),
                          steering_vector(m, pos["J"], pos["R"]).conj())
    H_JR = rician_link(los_jr, d_jr, ple_air, ka, scenario.pl_ref, rng)

    h_JD = link(m, pos["J"], pos["D"], ple_a, ka)
    h_Jk = np.array([link(m, pos["J"], e, ple_a, ka) for e in pos["E"]]).reshape(k, m)

    return RawChannels(h_SA=h_SA, h_AD=h_AD, h_SR=h_SR, h_RD=h_RD, h_Ak=h_Ak, h_Rk=h_Rk,
                       H_JR=H_JR, h_JD=h_JD, h_Jk=h_Jk, p_src=scenario.p_src,
                       p_jam_max=scenario.p_jam_max, noise_power=scenario.noise_power)


def _check_shape(name: str, array: np.ndarray, shape):
    if array.shape != tuple(shape):
        raise ChannelError(f"{name} has shape {array.shape}, expected {tuple(shape)}")


def cascade(raw: RawChannels) -> ChannelSet:
    """Form the cascaded channels diag(h_reflect^H) h_incident; estimates equal truth"""
    n_a, n_r, m = raw.h_SA.shape[0], raw.h_SR.shape[0], raw.h_JD.shape[0]
    k = raw.h_Ak.shape[0] if raw.h_Ak.ndim == 2 else -1
    _check_shape("h_AD", raw.h_AD, (n_a,))
    _check_shape("h_RD", raw.h_RD, (n_r,))
    _check_shape("h_Ak", raw.h_Ak, (k, n_a))
    _check_shape("h_Rk", raw.h_Rk, (k, n_r))
    _check_shape("H_JR", raw.H_JR, (n_r, m))
    _check_shape("h_Jk", raw.h_Jk, (k, m))

    h_SAk = raw.h_Ak.conj() * raw.h_SA[None, :]
    h_SRk = raw.h_Rk.conj() * raw.h_SR[None, :]
    H_JRk = raw.h_Rk.conj()[:, :, None] * raw.H_JR[None, :, :]
    h_Jk = raw.h_Jk.copy()
    zero = np.zeros(k)
    return ChannelSet(
        h_SAD=raw.h_AD.conj() * raw.h_SA,
        h_SRD=raw.h_RD.conj() * raw.h_SR,
        h_JRD=raw.h_RD.conj()[:, None] * raw.H_JR,
        h_JD=raw.h_JD.copy(),
        h_SAk=h_SAk, h_SRk=h_SRk, h_Jk=h_Jk, H_JRk=H_JRk,
        h_SAk_hat=h_SAk.copy(), h_SRk_hat=h_SRk.copy(), h_Jk_hat=h_Jk.copy(),
        H_JRk_hat=H_JRk.copy(),
        r_SAk=zero, r_SRk=zero.copy(), r_Jk=zero.copy(), r_JRk=zero.copy(),
        p_src=raw.p_src, p_jam_max=raw.p_jam_max, noise_power=raw.noise_power,
    )


def sample_ball(rng: np.random.Generator, shape, radius: float,
                on_boundary: bool = False) -> np.ndarray:
    """Complex array uniform in (or on) the Frobenius ball of the given radius"""
    direction = complex_normal(rng, shape)
    norm = np.linalg.norm(direction)
    if norm == 0 or radius == 0:
        return np.zeros(shape, dtype=complex)
    dim = 2 * int(np.prod(shape))
    scale = radius if on_boundary else radius * rng.uniform() ** (1.0 / dim)
    return direction / norm * scale


def perturb(cs: ChannelSet, delta: float, seed: int) -> ChannelSet:
    """Treat the given eavesdropper channels as estimates and draw true ones inside the balls

    Legitimate-side channels stay exact.
    """
    if delta < 0:
        raise ChannelError("uncertainty coefficient must be non-negative")
    rng = np.random.default_rng(seed)
    est = {"SAk": cs.h_SAk.copy(), "SRk": cs.h_SRk.copy(), "Jk": cs.h_Jk.copy(),
           "JRk": cs.H_JRk.copy()}
    radii = {x: np.zeros(cs.n_eves) for x in EVE_LINKS}
    true = {x: v.copy() for x, v in est.items()}
    for k in range(cs.n_eves):
        for x in EVE_LINKS:
            radii[x][k] = delta * np.linalg.norm(est[x][k])
            true[x][k] = est[x][k] + sample_ball(rng, est[x][k].shape, radii[x][k])
    return cs.replace(
        h_SAk=true["SAk"], h_SRk=true["SRk"], h_Jk=true["Jk"], H_JRk=true["JRk"],
        h_SAk_hat=est["SAk"], h_SRk_hat=est["SRk"], h_Jk_hat=est["Jk"], H_JRk_hat=est["JRk"],
        r_SAk=radii["SAk"], r_SRk=radii["SRk"], r_Jk=radii["Jk"], r_JRk=radii["JRk"],
    )


def build_channels(scenario: Scenario, placement: Placement, seed: int,
                   delta: Optional[float] = None) -> ChannelSet:
    """synthesize -> cascade -> perturb with the scenario's uncertainty coefficient"""
    delta = scenario.uncertainty_coeff if delta is None else delta
    cs = cascade(synthesize(scenario, placement, seed))
    return perturb(cs, delta, seed + 1)
