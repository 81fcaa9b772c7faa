"""World model: node positions, radio/environment parameters, traffic and weights.

A :class:`Scenario` is immutable once built. UAVs are identified by the
integers ``0..J-1``; the gateway always carries id ``J`` (see
:func:`gateway_id`).
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import asdict, dataclass, field, fields, replace
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np
import yaml

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 3.0e8

DELTA_MODES = ("subtree", "one_hop")
REVERT_MODES = ("initial", "round_start")


class ScenarioError(ValueError):
    """Invalid scenario contents or an unreadable scenario file."""


@dataclass(frozen=True)
class Position3D:
    x: float
    y: float
    z: float

    def distance_to(self, other: Position3D) -> float:
        return math.sqrt((self.x - other.x) ** 2 + (self.y - other.y) ** 2 + (self.z - other.z) ** 2)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, a) -> Position3D:
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class RadioParams:
    tx_power: float = 0.1  # W (20 dBm)
    carrier_freq: float = 2.0e9  # Hz
    noise_power: float = 1e-12  # W (-90 dBm)
    total_bandwidth: float = 40e6  # Hz
    snr_threshold: float = 10 ** (-4 / 10)  # linear (-4 dB)
    eta_los: float = 5.0  # dB
    eta_nlos: float = 20.0  # dB


@dataclass(frozen=True)
class EnvParams:
    c_env: float = 11.9
    d_env: float = 0.13
    speed_of_light: float = SPEED_OF_LIGHT


@dataclass(frozen=True)
class ForceParams:
    u_attract: float = 1.0
    u_repel_link: float = 10.0
    u_repel_collide: float = 10.0  # m^2


@dataclass(frozen=True)
class TrafficParams:
    packet_size: float = 2000.0  # bits
    sbs_rates: tuple[float, ...] = ()  # packets/s, aligned with Scenario.sbss


@dataclass(frozen=True)
class UtilityWeights:
    delta: float = 1.0  # utility per (packet/s)
    gamma: float = 1.0e4  # utility per second


@dataclass(frozen=True)
class ModelOptions:
    """Modelling switches that the formulas leave open.

    ``delta_mode`` selects how downstream traffic is aggregated onto a link
    (whole subtree, or one-hop children only). ``step3_revert`` and
    ``step7_revert`` choose the snapshot a UAV is returned to after a link
    deletion or a rejected replacement.
    """

    delta_mode: str = "subtree"
    interference: bool = True
    dl_band_fraction: float = 1.0
    ul_band_fraction: float = 1.0
    collision_radius: float = 50.0  # m
    min_altitude: float = 1.0  # m
    step3_revert: str = "initial"
    step7_revert: str = "round_start"


@dataclass(frozen=True)
class Uav:
    id: int
    position: Position3D
    initial: Position3D


@dataclass(frozen=True)
class Sbs:
    id: int
    position: Position3D
    serving_uav: int


@dataclass(frozen=True)
class Scenario:
    uavs: tuple[Uav, ...]
    gateway: Position3D
    sbss: tuple[Sbs, ...]
    radio: RadioParams = field(default_factory=RadioParams)
    env: EnvParams = field(default_factory=EnvParams)
    forces: ForceParams = field(default_factory=ForceParams)
    traffic: TrafficParams = field(default_factory=TrafficParams)
    weights: UtilityWeights = field(default_factory=UtilityWeights)
    seed: int = 0
    area_side: float = 5000.0
    model: ModelOptions = field(default_factory=ModelOptions)

    def __post_init__(self):
        validate_scenario(self)

    @property
    def num_uavs(self) -> int:
        return len(self.uavs)

    @property
    def gateway_id(self) -> int:
        return len(self.uavs)

    def initial_positions(self) -> np.ndarray:
        """UAV initial positions as a ``(J, 3)`` array."""
        return np.array([[u.initial.x, u.initial.y, u.initial.z] for u in self.uavs], dtype=float)

    def positions(self) -> np.ndarray:
        return np.array([[u.position.x, u.position.y, u.position.z] for u in self.uavs], dtype=float)

    def local_arrivals(self) -> list[float]:
        """Lambda_j for every UAV: sum of the arrival rates of the SBSs it serves."""
        lam = [0.0] * self.num_uavs
        for s, rate in zip(self.sbss, self.traffic.sbs_rates):
            lam[s.serving_uav] += rate
        return lam

    @cached_property
    def arrivals(self) -> tuple:
        return tuple(self.local_arrivals())

    def with_options(self, **kwargs) -> Scenario:
        return replace(self, model=replace(self.model, **kwargs))


def gateway_id(num_uavs: int) -> int:
    return num_uavs


def per_uav_bandwidth(radio: RadioParams, num_uavs: int) -> float:
    """Bandwidth available to each UAV: total bandwidth split evenly over J."""
    if num_uavs < 1:
        raise ValueError(f"num_uavs must be >= 1, got {num_uavs}")
    return radio.total_bandwidth / num_uavs


def _require(cond: bool, name: str, msg: str):
    if not cond:
        raise ScenarioError(f"{name}: {msg}")


def validate_scenario(s: Scenario) -> None:
    r = s.radio
    for f in fields(RadioParams):
        v = getattr(r, f.name)
        _require(math.isfinite(v) and v > 0, f"radio.{f.name}", f"must be strictly positive, got {v!r}")
    _require(r.eta_nlos >= r.eta_los, "radio.eta_nlos", "must be >= eta_los")
    _require(s.env.c_env > 0, "env.c_env", "must be > 0")
    _require(s.env.d_env > 0, "env.d_env", "must be > 0")
    _require(s.env.speed_of_light > 0, "env.speed_of_light", "must be > 0")
    for f in fields(ForceParams):
        _require(getattr(s.forces, f.name) >= 0, f"forces.{f.name}", "must be >= 0")
    _require(s.traffic.packet_size > 0, "traffic.packet_size", "must be > 0")
    _require(len(s.traffic.sbs_rates) == len(s.sbss), "traffic.sbs_rates",
             f"expected {len(s.sbss)} entries (one per SBS), got {len(s.traffic.sbs_rates)}")
    for k, lam in enumerate(s.traffic.sbs_rates):
        _require(lam >= 0, f"traffic.sbs_rates[{k}]", "must be >= 0")
    _require(s.weights.delta >= 0, "weights.delta", "must be >= 0")
    _require(s.weights.gamma >= 0, "weights.gamma", "must be >= 0")
    _require(s.area_side > 0, "area_side", "must be > 0")

    m = s.model
    _require(m.delta_mode in DELTA_MODES, "model.delta_mode", f"must be one of {DELTA_MODES}")
    _require(m.step3_revert in REVERT_MODES, "model.step3_revert", f"must be one of {REVERT_MODES}")
    _require(m.step7_revert in REVERT_MODES, "model.step7_revert", f"must be one of {REVERT_MODES}")
    _require(0 < m.dl_band_fraction <= 1, "model.dl_band_fraction", "must be in (0, 1]")
    _require(0 < m.ul_band_fraction <= 1, "model.ul_band_fraction", "must be in (0, 1]")
    _require(m.collision_radius >= 0, "model.collision_radius", "must be >= 0")
    _require(m.min_altitude > 0, "model.min_altitude", "must be > 0")

    _require(len(s.uavs) >= 1, "uavs", "at least one UAV is required")
    for k, u in enumerate(s.uavs):
        _require(u.id == k, f"uavs[{k}].id", f"UAV ids must be 0..J-1 in order, got {u.id}")
        _require(u.position.z > 0 and u.initial.z > 0, f"uavs[{k}].position", "UAV altitude must be > 0")
    _require(s.gateway.z == 0, "gateway.z", "gateway must be on the ground (z = 0)")
    for k, sbs in enumerate(s.sbss):
        _require(sbs.position.z == 0, f"sbss[{k}].position", "SBS must be on the ground (z = 0)")
        _require(0 <= sbs.serving_uav < len(s.uavs), f"sbss[{k}].serving_uav",
                 f"references unknown UAV id {sbs.serving_uav}")


def nearest_uav(point: Position3D, uavs) -> int:
    """Index of the closest UAV in 3D; ties go to the lowest id."""
    best, best_d = 0, math.inf
    for u in uavs:
        d = point.distance_to(u.position)
        if d < best_d:
            best, best_d = u.id, d
    return best


def scenario_rng(seed: int, stream: int) -> np.random.Generator:
    """PCG64 generator for one named stream of a seed (0: scenario, 1: game)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), stream])))


def generate_scenario(seed: int, num_uavs: int, num_sbs: int, area_side: float = 5000.0,
                      uav_altitude: float = 100.0, *, rate_scale: float = 1.0,
                      gateway: Position3D | None = None, **params) -> Scenario:
    """Uniformly random UAV/SBS deployment in a square, SBSs served by their nearest UAV.

    ``params`` may override any of the parameter blocks (``radio``, ``env``,
    ``forces``, ``weights``, ``model``) or ``packet_size``.
    """
    if num_uavs < 1 or num_sbs < 1:
        raise ValueError(f"counts must be >= 1 (num_uavs={num_uavs}, num_sbs={num_sbs})")
    if area_side <= 0:
        raise ValueError(f"area_side must be > 0, got {area_side}")
    rng = scenario_rng(seed, 0)
    uav_xy = rng.uniform(0.0, area_side, size=(num_uavs, 2))
    sbs_xy = rng.uniform(0.0, area_side, size=(num_sbs, 2))
    rates = rng.uniform(0.0, 1.0, size=num_sbs) * rate_scale

    uavs = []
    for k, (x, y) in enumerate(uav_xy):
        p = Position3D(float(x), float(y), float(uav_altitude))
        uavs.append(Uav(k, p, p))
    sbss = []
    for k, (x, y) in enumerate(sbs_xy):
        p = Position3D(float(x), float(y), 0.0)
        sbss.append(Sbs(k, p, nearest_uav(p, uavs)))
    if gateway is None:
        gateway = Position3D(area_side / 2, area_side / 2, 0.0)

    packet_size = params.pop("packet_size", TrafficParams.packet_size)
    s = Scenario(
        uavs=tuple(uavs),
        gateway=gateway,
        sbss=tuple(sbss),
        traffic=TrafficParams(packet_size=packet_size, sbs_rates=tuple(float(r) for r in rates)),
        seed=int(seed),
        area_side=float(area_side),
        **params,
    )
    _warn_unreachable(s)
    return s


def _warn_unreachable(s: Scenario) -> None:
    from .channel import max_link_distance

    dmax = max_link_distance(s.radio, s.env)
    if all(u.position.distance_to(s.gateway) > dmax for u in s.uavs):
        logger.warning("no UAV lies within max_link_distance (%.1f m) of the gateway", dmax)


# ---------------------------------------------------------------------------
# Scenario files (YAML, SI units; unit-suffixed strings accepted on load)
# ---------------------------------------------------------------------------

_UNIT_RE = re.compile(r"^\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*([A-Za-z]*)\s*$")

_POWER_UNITS = {"w": 1.0, "mw": 1e-3}
_FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}

# field name -> quantity kind
_KINDS = {
    "tx_power": "power",
    "noise_power": "power",
    "carrier_freq": "freq",
    "total_bandwidth": "freq",
    "snr_threshold": "ratio",
    "eta_los": "db",
    "eta_nlos": "db",
}


def parse_quantity(value: Any, kind: str, name: str) -> float:
    """Convert a number or a unit-suffixed string (``"20 dBm"``, ``"-4 dB"``) to SI."""
    if isinstance(value, bool):
        raise ScenarioError(f"{name}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ScenarioError(f"{name}: expected a number, got {value!r}")
    m = _UNIT_RE.match(value)
    if not m:
        raise ScenarioError(f"{name}: cannot parse quantity {value!r}")
    num, unit = float(m.group(1)), m.group(2).lower()
    if unit == "":
        return num
    if kind == "power":
        if unit == "dbm":
            return 10 ** (num / 10) * 1e-3
        if unit == "dbw":
            return 10 ** (num / 10)
        if unit in _POWER_UNITS:
            return num * _POWER_UNITS[unit]
    elif kind == "freq" and unit in _FREQ_UNITS:
        return num * _FREQ_UNITS[unit]
    elif kind == "ratio" and unit == "db":
        return 10 ** (num / 10)
    elif kind == "db" and unit == "db":
        return num
    raise ScenarioError(f"{name}: unit {m.group(2)!r} not valid here")


def _pos(v, name: str) -> Position3D:
    if isinstance(v, dict):
        try:
            return Position3D(float(v["x"]), float(v["y"]), float(v["z"]))
        except KeyError as e:
            raise ScenarioError(f"{name}: missing required field {e.args[0]!r}") from None
    if isinstance(v, (list, tuple)) and len(v) == 3:
        return Position3D(*(float(c) for c in v))
    raise ScenarioError(f"{name}: expected [x, y, z], got {v!r}")


def _get(d: dict, key: str, ctx: str):
    if not isinstance(d, dict):
        raise ScenarioError(f"{ctx}: expected a mapping")
    if key not in d:
        raise ScenarioError(f"missing required field {ctx + '.' if ctx else ''}{key}")
    return d[key]


def params_from_dict(cls, raw: dict | None, ctx: str):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ScenarioError(f"{ctx}: expected a mapping")
    defaults = {f.name: f.default for f in fields(cls)}
    unknown = set(raw) - set(defaults)
    if unknown:
        raise ScenarioError(f"{ctx}: unknown field(s) {sorted(unknown)}")
    kwargs = {}
    for k, v in raw.items():
        name = f"{ctx}.{k}"
        # YAML 1.1 reads "1.0e4" as a string; numeric fields still parse it
        numeric = isinstance(defaults[k], (int, float)) and not isinstance(defaults[k], bool)
        if k in _KINDS:
            kwargs[k] = parse_quantity(v, _KINDS[k], name)
        elif k == "sbs_rates":
            kwargs[k] = tuple(parse_quantity(x, "plain", f"{name}[{i}]") for i, x in enumerate(v))
        elif isinstance(v, bool) or (isinstance(v, str) and not numeric):
            kwargs[k] = v
        else:
            kwargs[k] = parse_quantity(v, "plain", name)
    return cls(**kwargs)


def scenario_from_dict(d: dict) -> Scenario:
    if not isinstance(d, dict):
        raise ScenarioError("scenario file must contain a mapping at top level")
    uavs = []
    for k, u in enumerate(_get(d, "uavs", "")):
        pos = _pos(_get(u, "position", f"uavs[{k}]"), f"uavs[{k}].position")
        init = _pos(u["initial"], f"uavs[{k}].initial") if "initial" in u else pos
        uavs.append(Uav(int(_get(u, "id", f"uavs[{k}]")), pos, init))
    sbss = []
    for k, sb in enumerate(d.get("sbss") or []):
        sbss.append(Sbs(int(_get(sb, "id", f"sbss[{k}]")),
                        _pos(_get(sb, "position", f"sbss[{k}]"), f"sbss[{k}].position"),
                        int(_get(sb, "serving_uav", f"sbss[{k}]"))))
    return Scenario(
        uavs=tuple(uavs),
        gateway=_pos(_get(d, "gateway", ""), "gateway"),
        sbss=tuple(sbss),
        radio=params_from_dict(RadioParams, d.get("radio"), "radio"),
        env=params_from_dict(EnvParams, d.get("env"), "env"),
        forces=params_from_dict(ForceParams, d.get("forces"), "forces"),
        traffic=params_from_dict(TrafficParams, d.get("traffic"), "traffic"),
        weights=params_from_dict(UtilityWeights, d.get("weights"), "weights"),
        seed=int(d.get("seed", 0)),
        area_side=parse_quantity(d.get("area_side", 5000.0), "plain", "area_side"),
        model=params_from_dict(ModelOptions, d.get("model"), "model"),
    )


def scenario_to_dict(s: Scenario) -> dict:
    def p(pos: Position3D):
        return [pos.x, pos.y, pos.z]

    traffic = asdict(s.traffic)
    traffic["sbs_rates"] = list(s.traffic.sbs_rates)
    return {
        "seed": s.seed,
        "area_side": s.area_side,
        "gateway": p(s.gateway),
        "uavs": [{"id": u.id, "position": p(u.position), "initial": p(u.initial)} for u in s.uavs],
        "sbss": [{"id": b.id, "position": p(b.position), "serving_uav": b.serving_uav} for b in s.sbss],
        "radio": asdict(s.radio),
        "env": asdict(s.env),
        "forces": asdict(s.forces),
        "traffic": traffic,
        "weights": asdict(s.weights),
        "model": asdict(s.model),
    }


def save_scenario(s: Scenario, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("# UAV backhaul scenario; SI units (W, Hz, m, bits, packets/s), eta_* in dB\n")
        yaml.safe_dump(scenario_to_dict(s), fh, sort_keys=False, default_flow_style=None)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"{path}: {e.strerror}") from e
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" (line {mark.line + 1}, column {mark.column + 1})" if mark is not None else ""
        raise ScenarioError(f"{path}: parse error{where}: {getattr(e, 'problem', e)}") from e
    return scenario_from_dict(raw)
