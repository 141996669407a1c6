"""
Network Scenario Definition
Geometry, radio constants and uncertainty configuration shared by every other module
"""
import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Tuple, Union

import numpy as np
from dotenv import dotenv_values
from rich.console import Console

from .config import *
from .errors import ScenarioError

console = Console()

Point2 = Tuple[float, float]
Point3 = Tuple[float, float, float]


def dbm_to_watts(power_dbm: float) -> float:
    return 10.0 ** ((power_dbm - 30.0) / 10.0)


def watts_to_dbm(power_w: float) -> float:
    return 10.0 * math.log10(power_w) + 30.0


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


@dataclass(frozen=True)
class Placement:
    """Horizontal position of the aerial platform (ARIS + jammer)"""
    xy: Point2

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.xy, dtype=float)

    @classmethod
    def parse(cls, text: str) -> "Placement":
        """Parse 'X,Y' as used on the command line"""
        try:
            x, y = (float(v) for v in text.split(","))
        except ValueError as e:
            raise ScenarioError(f"placement must look like 'X,Y', got '{text}'") from e
        return cls((x, y))


@dataclass(frozen=True)
class Scenario:
    """Immutable description of the network; all quantities in linear SI units"""
    area_bounds: Tuple[float, float, float, float]
    src_pos: Point2
    dst_pos: Point2
    eve_positions: Tuple[Point2, ...]
    fixed_ris_pos: Point3
    aris_altitude: float
    n_fixed: int
    n_aris: int
    n_jam_antennas: int
    p_src: float
    p_jam_max: float
    noise_power: float
    rician_fixed: float
    rician_aris: float
    ple_fixed: float
    ple_aris: float
    ple_air: float
    pl_ref: float
    uncertainty_coeff: float
    rng_seed: int
    los_model: str = "ula"

    def __post_init__(self):
        # normalise sequences so equality and hashing behave
        object.__setattr__(self, "area_bounds", tuple(float(v) for v in self.area_bounds))
        object.__setattr__(self, "src_pos", tuple(float(v) for v in self.src_pos))
        object.__setattr__(self, "dst_pos", tuple(float(v) for v in self.dst_pos))
        object.__setattr__(self, "eve_positions",
                           tuple(tuple(float(v) for v in p) for p in self.eve_positions))
        object.__setattr__(self, "fixed_ris_pos", tuple(float(v) for v in self.fixed_ris_pos))
        self.validate()

    def validate(self):
        """Check the scenario invariants, raising ScenarioError on the first violation"""
        x0, x1, y0, y1 = self.area_bounds
        if not (x1 > x0 and y1 > y0):
            raise ScenarioError(f"degenerate area bounds {self.area_bounds}")
        if len(self.eve_positions) < 1:
            raise ScenarioError("at least one eavesdropper is required")
        for name, pos in [("src_pos", self.src_pos), ("dst_pos", self.dst_pos)] + \
                [(f"eve_positions[{k}]", p) for k, p in enumerate(self.eve_positions)]:
            if len(pos) != 2 or not self.contains(pos):
                raise ScenarioError(f"{name}={pos} lies outside area {self.area_bounds}")
        if len(self.fixed_ris_pos) != 3:
            raise ScenarioError("fixed_ris_pos must be a 3-D coordinate")
        if not self.fixed_ris_pos[2] > 0:
            raise ScenarioError("fixed RIS height must be positive")
        if not self.aris_altitude > self.fixed_ris_pos[2]:
            raise ScenarioError("ARIS altitude must exceed the fixed RIS height")
        for name in ("p_src", "p_jam_max", "noise_power", "pl_ref"):
            if not getattr(self, name) > 0:
                raise ScenarioError(f"{name} must be positive")
        if self.uncertainty_coeff < 0:
            raise ScenarioError("uncertainty_coeff must be non-negative")
        for name in ("n_fixed", "n_aris", "n_jam_antennas"):
            if getattr(self, name) < 1:
                raise ScenarioError(f"{name} must be at least 1")
        if self.rician_fixed < 0 or self.rician_aris < 0:
            raise ScenarioError("Rician factors must be non-negative")
        if self.los_model not in ("ula", "random"):
            raise ScenarioError(f"unknown los_model '{self.los_model}'")

    @property
    def n_eves(self) -> int:
        return len(self.eve_positions)

    def contains(self, xy: Iterable[float]) -> bool:
        x, y = list(xy)[:2]
        x0, x1, y0, y1 = self.area_bounds
        return x0 <= x <= x1 and y0 <= y <= y1

    def clip(self, xy: Iterable[float]) -> Point2:
        x, y = list(xy)[:2]
        x0, x1, y0, y1 = self.area_bounds
        return (float(np.clip(x, x0, x1)), float(np.clip(y, y0, y1)))

    def check_placement(self, placement: Placement):
        if not self.contains(placement.xy):
            raise ScenarioError(f"placement {placement.xy} lies outside area {self.area_bounds}")

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def positions_3d(self, placement: Placement) -> Dict[str, np.ndarray]:
        """3-D coordinates of every node for a given aerial placement"""
        ground = lambda p: np.array([p[0], p[1], GROUND_HEIGHT])
        aerial = np.array([placement.xy[0], placement.xy[1], self.aris_altitude])
        return {
            "S": ground(self.src_pos),
            "D": ground(self.dst_pos),
            "R": np.asarray(self.fixed_ris_pos, dtype=float),
            "A": aerial,
            "J": aerial,
            "E": np.array([ground(p) for p in self.eve_positions]),
        }


def draw_eavesdroppers(n: int, center: Point2, radius: float, seed: int) -> Tuple[Point2, ...]:
    """Uniform positions inside a disk"""
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.uniform(size=n))
    phi = rng.uniform(0.0, 2 * np.pi, size=n)
    return tuple((center[0] + r[i] * np.cos(phi[i]), center[1] + r[i] * np.sin(phi[i]))
                 for i in range(n))


def default_scenario(seed: int = DEFAULT_SEED, n_eves: int = N_EAVESDROPPERS,
                     eve_center: Point2 = EAVESDROPPER_CENTER) -> Scenario:
    """Full-scale configuration of the simulation study"""
    return Scenario(
        area_bounds=AREA_BOUNDS,
        src_pos=SOURCE_POSITION,
        dst_pos=DESTINATION_POSITION,
        eve_positions=draw_eavesdroppers(n_eves, eve_center, EAVESDROPPER_RADIUS, seed),
        fixed_ris_pos=FIXED_RIS_POSITION,
        aris_altitude=ARIS_ALTITUDE,
        n_fixed=N_FIXED,
        n_aris=N_ARIS,
        n_jam_antennas=N_JAM_ANTENNAS,
        p_src=dbm_to_watts(SOURCE_POWER_DBM),
        p_jam_max=dbm_to_watts(JAM_POWER_DBM),
        noise_power=dbm_to_watts(NOISE_POWER_DBM),
        rician_fixed=db_to_linear(RICIAN_FIXED_DB),
        rician_aris=db_to_linear(RICIAN_ARIS_DB),
        ple_fixed=PLE_FIXED,
        ple_aris=PLE_ARIS,
        ple_air=PLE_AIR,
        pl_ref=db_to_linear(-PATH_LOSS_REF_DB),
        uncertainty_coeff=UNCERTAINTY_COEFF,
        rng_seed=seed,
    )


def desk_scenario(seed: int = DEFAULT_SEED) -> Scenario:
    """Same geometry with small arrays, used by the acceptance suite"""
    return default_scenario(seed, n_eves=DESK_N_EAVESDROPPERS).replace(
        n_fixed=DESK_N_FIXED,
        n_aris=DESK_N_ARIS,
        n_jam_antennas=DESK_N_JAM_ANTENNAS,
    )


# Scenario file format: flat KEY=VALUE lines, '#' comments, linear SI units

_FIELD_NOTES = {
    "area_bounds": "x_min,x_max,y_min,y_max in meters",
    "src_pos": "x,y in meters (ground)",
    "dst_pos": "x,y in meters (ground)",
    "eve_positions": "x,y pairs separated by ';' in meters (ground)",
    "fixed_ris_pos": "x,y,z in meters",
    "aris_altitude": "meters",
    "n_fixed": "fixed-RIS elements",
    "n_aris": "aerial-RIS elements",
    "n_jam_antennas": "jammer antennas",
    "p_src": "watts",
    "p_jam_max": "watts",
    "noise_power": "watts",
    "rician_fixed": "linear Rician factor, fixed-RIS links",
    "rician_aris": "linear Rician factor, aerial links",
    "ple_fixed": "path-loss exponent, fixed-RIS ground links",
    "ple_aris": "path-loss exponent, aerial ground links",
    "ple_air": "path-loss exponent, jammer to fixed RIS",
    "pl_ref": "linear path loss at 1 m",
    "uncertainty_coeff": "dimensionless error-bound coefficient",
    "rng_seed": "integer",
    "los_model": "ula or random",
}


def _format_value(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if value and isinstance(value[0], tuple):
        return ";".join(",".join(repr(float(v)) for v in p) for p in value)
    return ",".join(repr(float(v)) for v in value)


def _parse_value(name: str, text: str, kind):
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    if kind is str:
        return text
    if name == "eve_positions":
        return tuple(tuple(float(v) for v in part.split(",")) for part in text.split(";") if part)
    return tuple(float(v) for v in text.split(","))


def save_scenario(scenario: Scenario, path: Union[str, Path]):
    """Write a scenario as a human-editable KEY=VALUE file"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# Robust aerial-RIS secrecy scenario", ""]
    for f in dataclasses.fields(scenario):
        lines.append(f"# {_FIELD_NOTES.get(f.name, '')}")
        lines.append(f"{f.name.upper()}={_format_value(getattr(scenario, f.name))}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    console.print(f"💾 Scenario saved to [cyan]{path}[/cyan]")


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Read a scenario written by save_scenario (or edited by hand)"""
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    raw = {k.lower(): v for k, v in dotenv_values(path).items() if v is not None}
    kinds = {"n_fixed": int, "n_aris": int, "n_jam_antennas": int, "rng_seed": int,
             "los_model": str}
    values = {}
    for f in dataclasses.fields(Scenario):
        if f.name not in raw:
            if f.default is not dataclasses.MISSING:
                continue
            raise ScenarioError(f"scenario file {path} is missing key {f.name.upper()}")
        kind = kinds.get(f.name, float if f.type in (float, "float") else tuple)
        try:
            values[f.name] = _parse_value(f.name, raw[f.name], kind)
        except ValueError as e:
            raise ScenarioError(f"bad value for {f.name.upper()} in {path}: {raw[f.name]}") from e
    unknown = set(raw) - {f.name for f in dataclasses.fields(Scenario)}
    if unknown:
        console.print(f"[yellow]Warning: ignoring unknown scenario keys {sorted(unknown)}[/yellow]")
    return Scenario(**values)
