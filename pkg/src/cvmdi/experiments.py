"""
Distance sweeps, maximum-distance search, matching grids and noise curves.

A :class:`ScenarioConfig` fixes everything except the Alice-Bob distance;
``scenario_at(L)`` places the relay according to the topology and returns
the :class:`~cvmdi.protocol.Scenario` evaluated by the key-rate functions.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import EstimationError, NoKeyError, ValidationError
from .keyrate import FiniteSizeParams, asymptotic_key_rate, finite_size_key_rate
from .protocol import (
    ChannelParams,
    GainSettings,
    ModeMatchingSet,
    ProtocolParams,
    Scenario,
    equivalent_channel,
)
from .temporal import DetectorMode, detector_tm, load_waveform_csv, mode_match, normalize

TOPOLOGIES = ("symmetric", "charlie-at-alice", "charlie-at-bob", "explicit")
MATCHING_KEYS = ("eta_A1", "eta_A2", "eta_B1", "eta_B2")
MAX_SEARCH_KM = 2000.0


@dataclass(frozen=True)
class SweepSpec:
    variable: str = "L"
    start: float = 0.0
    stop: float = 100.0
    step: float = 0.1

    def __post_init__(self):
        if self.variable != "L":
            raise ValidationError(f"sweep.variable: only 'L' (km) can be swept, got {self.variable!r}")
        if self.step <= 0 or self.stop < self.start or self.start < 0:
            raise ValidationError("sweep: need 0 <= start <= stop and step > 0")

    def values(self) -> np.ndarray:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return np.round(self.start + self.step * np.arange(n), 9)


@dataclass(frozen=True)
class GridSpec:
    eta_A: tuple[float, float] = (0.9, 1.0)
    eta_B: tuple[float, float] = (0.9, 1.0)
    points: int = 101
    L: float = 15.0

    def __post_init__(self):
        for name in ("eta_A", "eta_B"):
            lo, hi = getattr(self, name)
            if not 0.9 <= lo <= hi <= 1.0:
                raise ValidationError(f"grid.{name}: bounds must satisfy 0.9 <= lo <= hi <= 1")
        if self.points < 2:
            raise ValidationError("grid.points must be >= 2")
        if self.L < 0:
            raise ValidationError("grid.L must be non-negative")


@dataclass(frozen=True)
class ScenarioConfig:
    """Topology, physical parameters and run settings for one experiment."""

    topology: str = "charlie-at-bob"
    channel: ChannelParams = field(default_factory=ChannelParams)
    matching: ModeMatchingSet = field(default_factory=ModeMatchingSet)
    protocol: ProtocolParams = field(default_factory=ProtocolParams)
    gains: GainSettings | None = None
    finite_size: FiniteSizeParams | None = None
    sweep: SweepSpec = field(default_factory=SweepSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    eta_B_curves: tuple[float, ...] = (1.0, 0.99, 0.97, 0.95)

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValidationError(f"topology: expected one of {TOPOLOGIES}, got {self.topology!r}")
        if self.topology == "explicit" and self.channel.L_AC + self.channel.L_BC <= 0:
            raise ValidationError("topology: 'explicit' needs L_AC + L_BC > 0 to fix the relay position")

    def split(self, L: float) -> tuple[float, float]:
        """(L_AC, L_BC) for a total Alice-Bob distance ``L``."""
        if L < 0:
            raise ValidationError(f"distance must be non-negative, got {L}")
        if self.topology == "symmetric":
            return L / 2.0, L / 2.0
        if self.topology == "charlie-at-alice":
            return 0.0, L
        if self.topology == "charlie-at-bob":
            return L, 0.0
        frac = self.channel.L_AC / (self.channel.L_AC + self.channel.L_BC)
        return L * frac, L * (1.0 - frac)

    def scenario_at(self, L: float, matching: ModeMatchingSet | None = None) -> Scenario:
        L_AC, L_BC = self.split(L)
        return Scenario(
            channel=replace(self.channel, L_AC=L_AC, L_BC=L_BC),
            matching=matching or self.matching,
            protocol=self.protocol,
            gains=self.gains,
        )

    def to_dict(self) -> dict:
        d = {
            "topology": self.topology,
            "channel": asdict(self.channel),
            "protocol": asdict(self.protocol),
            "matching": asdict(self.matching),
            "gains": asdict(self.gains) if self.gains else None,
            "finite_size": asdict(self.finite_size) if self.finite_size else None,
            "sweep": asdict(self.sweep),
            "grid": asdict(self.grid),
            "excess_noise": {"eta_B": list(self.eta_B_curves)},
        }
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# -- config loading ----------------------------------------------------------

def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name) or {}
    if not isinstance(sec, dict):
        raise ValidationError(f"{name}: expected an object")
    return sec


def _build(cls, sec: dict, name: str, rename: dict | None = None):
    rename = rename or {}
    kwargs = {}
    for k, v in sec.items():
        key = rename.get(k, k)
        if key not in cls.__dataclass_fields__:
            raise ValidationError(f"{name}.{k}: unknown field")
        kwargs[key] = v
    try:
        return cls(**kwargs)
    except ValidationError as exc:
        raise ValidationError(f"{name}: {exc}") from None
    except TypeError as exc:
        raise ValidationError(f"{name}: {exc}") from None


def waveform_matching(spec: dict, base: Path) -> float:
    """Mode-matching coefficient from a ``{"signal": csv, "detector": csv}`` entry."""
    try:
        sig_path = base / spec["signal"]
        det_path = base / spec["detector"]
    except KeyError as exc:
        raise ValidationError(f"waveform matching entry needs key {exc}") from None
    signal = normalize(load_waveform_csv(sig_path, carrier=float(spec.get("signal_carrier", 0.0))))
    det = DetectorMode(load_waveform_csv(det_path), float(spec.get("omega_lo", 0.0)))
    return mode_match(signal, detector_tm(det))


def _resolve_matching(sec: dict, base: Path) -> ModeMatchingSet:
    values: dict[str, float] = {}
    for k, v in sec.items():
        if k == "eta_A":
            targets = ("eta_A1", "eta_A2")
        elif k == "eta_B":
            targets = ("eta_B1", "eta_B2")
        elif k in MATCHING_KEYS:
            targets = (k,)
        else:
            raise ValidationError(f"matching.{k}: unknown coefficient")
        if isinstance(v, dict):
            try:
                val = waveform_matching(v, base)
            except ValidationError as exc:
                raise ValidationError(f"matching.{k}: {exc}") from None
        elif isinstance(v, (int, float)) and not isinstance(v, bool):
            val = float(v)
        else:
            raise ValidationError(f"matching.{k}: expected a number or waveform object")
        for t in targets:
            values[t] = val
    return _build(ModeMatchingSet, values, "matching")


def config_from_dict(raw: dict, base: Path | str = ".") -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ValidationError("config: expected a JSON object")
    known = {"topology", "channel", "protocol", "matching", "gains", "finite_size", "sweep",
             "grid", "excess_noise"}
    extra = set(raw) - known
    if extra:
        raise ValidationError(f"config: unknown section(s) {sorted(extra)}")
    base = Path(base)
    topo = raw.get("topology", "charlie-at-bob")
    channel = _section(raw, "channel")
    if isinstance(topo, dict):
        channel = {**channel, **{k: v for k, v in topo.items() if k in ("L_AC", "L_BC")}}
        topo = topo.get("type", "explicit")
    kwargs = dict(
        topology=topo,
        channel=_build(ChannelParams, channel, "channel"),
        protocol=_build(ProtocolParams, _section(raw, "protocol"), "protocol"),
        matching=_resolve_matching(_section(raw, "matching"), base),
    )
    if raw.get("gains"):
        kwargs["gains"] = _build(GainSettings, _section(raw, "gains"), "gains")
    if raw.get("finite_size"):
        kwargs["finite_size"] = _build(FiniteSizeParams, _section(raw, "finite_size"), "finite_size")
    if raw.get("sweep"):
        kwargs["sweep"] = _build(SweepSpec, _section(raw, "sweep"), "sweep")
    if raw.get("grid"):
        g = dict(_section(raw, "grid"))
        for k in ("eta_A", "eta_B"):
            if k in g:
                g[k] = tuple(g[k])
        kwargs["grid"] = _build(GridSpec, g, "grid")
    if raw.get("excess_noise"):
        vals = _section(raw, "excess_noise").get("eta_B")
        if not vals or any(not 0 < float(v) <= 1 for v in vals):
            raise ValidationError("excess_noise.eta_B: need a list of values in (0, 1]")
        kwargs["eta_B_curves"] = tuple(float(v) for v in vals)
    try:
        return ScenarioConfig(**kwargs)
    except ValidationError as exc:
        raise ValidationError(f"config: {exc}") from None


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from None
    return config_from_dict(raw, path.parent)


# -- experiments -------------------------------------------------------------

def _finite_rate(scenario: Scenario, fs: FiniteSizeParams):
    try:
        return finite_size_key_rate(scenario, fs)
    except EstimationError:
        return None


def _sweep_row(config: ScenarioConfig, L: float, fs: FiniteSizeParams | None) -> dict:
    sc = config.scenario_at(L)
    res = asymptotic_key_rate(sc)
    row = {
        "L_km": L,
        "L_AC": sc.channel.L_AC,
        "L_BC": sc.channel.L_BC,
        "K": res.K,
        "I_AB": res.I_AB,
        "chi_BE": res.chi_BE,
        "eps_x": res.diagnostics["eps_x"],
        "eps_p": res.diagnostics["eps_p"],
    }
    if fs is not None:
        fres = _finite_rate(sc, fs)
        row["K_finite"] = fres.K if fres else 0.0
        row["chi_BE_finite"] = fres.chi_BE if fres else float("nan")
    return row


def _pmap(fn, items, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def sweep_distance(config: ScenarioConfig, finite_size: bool = False, workers: int = 1) -> list[dict]:
    """Key rate and channel diagnostics at each distance of ``config.sweep``."""
    fs = _finite_params(config, finite_size)
    return _pmap(lambda L: _sweep_row(config, float(L), fs), config.sweep.values(), workers)


def _finite_params(config: ScenarioConfig, finite_size: bool) -> FiniteSizeParams | None:
    if not finite_size:
        return config.finite_size
    return config.finite_size or FiniteSizeParams()


def key_positive(config: ScenarioConfig, L: float, finite: FiniteSizeParams | None = None,
                 matching: ModeMatchingSet | None = None) -> bool:
    sc = config.scenario_at(L, matching)
    if finite is None:
        return asymptotic_key_rate(sc).K_raw > 0
    res = _finite_rate(sc, finite)
    return res is not None and res.K_raw > 0


def max_distance(config: ScenarioConfig, finite_size: bool = False, tol: float = 1e-3,
                 matching: ModeMatchingSet | None = None) -> float:
    """
    Largest distance (km) with a positive key rate, by bisection to ``tol``.

    Raises :class:`NoKeyError` if there is no key even at zero distance.
    """
    fs = _finite_params(config, finite_size) if finite_size else None
    ok = lambda L: key_positive(config, L, fs, matching)  # noqa: E731
    if not ok(0.0):
        raise NoKeyError("no positive key rate at zero distance")
    lo, hi = 0.0, 1.0
    while ok(hi):
        lo, hi = hi, 2.0 * hi
        if hi > MAX_SEARCH_KM:
            raise NoKeyError(f"key rate still positive at {MAX_SEARCH_KM} km")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def grid_sweep(config: ScenarioConfig, fixed_L: float | None = None, workers: int = 1) -> list[dict]:
    """Key rate over a dense (eta_A, eta_B) grid at one distance, symmetric detectors."""
    g = config.grid
    L = g.L if fixed_L is None else fixed_L
    ea = np.round(np.linspace(g.eta_A[0], g.eta_A[1], g.points), 12)
    eb = np.round(np.linspace(g.eta_B[0], g.eta_B[1], g.points), 12)
    pairs = [(float(a), float(b)) for a in ea for b in eb]

    def row(p):
        sc = config.scenario_at(L, ModeMatchingSet.symmetric(*p))
        return {"eta_A": p[0], "eta_B": p[1], "K": asymptotic_key_rate(sc).K}

    return _pmap(row, pairs, workers)


def excess_noise_curve(config: ScenarioConfig) -> list[dict]:
    """Equivalent excess noise (x quadrature, optimal gain) against distance for each eta_B."""
    rows = []
    for L in config.sweep.values():
        row = {"L_km": float(L)}
        for eb in config.eta_B_curves:
            sc = config.scenario_at(float(L), replace(config.matching, eta_B1=eb, eta_B2=eb))
            eq = equivalent_channel(sc.channel, sc.matching, sc.protocol)
            row[f"eps_etaB={eb:g}"] = eq.eps_x
        rows.append(row)
    return rows


# -- CSV output --------------------------------------------------------------

def write_csv(rows: list[dict], out, config: ScenarioConfig | None = None, command: str = "") -> None:
    """Write rows as CSV, preceded by a comment line carrying the config hash."""
    own = isinstance(out, (str, Path))
    fh = open(out, "w", newline="") if own else out
    try:
        if config is not None:
            fh.write(f"# cvmdi {command} config_sha256={config.digest()}\n")
        if rows:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            for r in rows:
                w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                            for k, v in r.items()})
    finally:
        if own:
            fh.close()


def rows_to_csv_text(rows: list[dict], config: ScenarioConfig | None = None, command: str = "") -> str:
    buf = io.StringIO()
    write_csv(rows, buf, config, command)
    return buf.getvalue()
