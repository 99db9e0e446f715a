"""Experiment runner.

Configs are TOML (grammar and keys in ``docs/config.md``). Floats are read
as :class:`decimal.Decimal` and converted to ``float`` exactly once, when a
field is validated. A run writes

* ``<out>/report.txt``: JSON, keys sorted, one record per hierarchy level;
* ``<out>/series/<name>.csv``: fixed columns, floats with 17 significant digits.

Everything numeric is a pure function of the config and seed, so repeated
runs produce byte-identical CSV files whatever the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from decimal import Decimal
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ._version import __version__
from .classical import ArcSet, CellSet, ClassifierParams, MapSpec, classify_set_level, correlation_series
from .dephasing import (
    SpectrumSpec,
    amplitude_series,
    cesaro_average,
    cesaro_residual,
    coherent_state,
    gaussian_interference,
    quasi_continuous_interference,
    random_spectrum,
)
from .errors import ConfigError, ExperimentError, QEHError
from .hierarchy import Trajectory, quantum_verdict
from .hilbert import DensityState, Unitary, make_density, maximally_mixed, pure_state
from .rng import make_rng, random_density, random_hermitian, random_unitary
from .rotator import (
    RotatorSpec,
    apply_floquet,
    build_floquet,
    cos_theta,
    fit_localization,
    gaussian_packet,
    momentum_state,
    momentum_window,
    regime_report,
)
from .verdict import HierarchyVerdict
from .wigner import inverse_weyl, pairing_check, product_symbol_discrepancy, wigner_transform

SUBCOMMANDS = ("classify-map", "qeh-test", "kicked-rotator", "dephasing", "wigner-check", "sweep")
REPORT_SCHEMA = "qeh-report/1"
CSV_VERSION = 1
SEED_MAX = (1 << 64) - 1
_MISSING = object()


# ---------------------------------------------------------------- config

@dataclass(frozen=True)
class ExperimentConfig:
    subcommand: str
    body: dict = field(default_factory=dict)
    seed: int = 0
    out: str | None = None
    workers: int = 1

    def section(self, name: str) -> "Section":
        return Section(self.body.get(name, {}), name)


class Section:
    """Typed, path-aware access to one TOML table."""

    def __init__(self, data, path: str):
        if not isinstance(data, dict):
            raise ConfigError(path, "expected a table")
        self.data = data
        self.path = path

    def _raw(self, key, default):
        if key in self.data:
            return self.data[key]
        if default is _MISSING:
            raise ConfigError(f"{self.path}.{key}", "required field missing")
        return default

    def has(self, key) -> bool:
        return key in self.data

    def sub(self, key) -> "Section":
        return Section(self.data.get(key, {}), f"{self.path}.{key}")

    def str(self, key, default=_MISSING, choices=None) -> str:
        if key not in self.data and default is not _MISSING:
            return default
        v = self._raw(key, default)
        if not isinstance(v, str):
            raise ConfigError(f"{self.path}.{key}", f"expected a string, got {v!r}")
        if choices is not None and v not in choices:
            raise ConfigError(f"{self.path}.{key}", f"expected one of {list(choices)}, got {v!r}")
        return v

    def int(self, key, default=_MISSING, lo=None, hi=None) -> int:
        if key not in self.data and default is not _MISSING:
            return default
        v = self._raw(key, default)
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{self.path}.{key}", f"expected an integer, got {v!r}")
        if lo is not None and v < lo:
            raise ConfigError(f"{self.path}.{key}", f"must be >= {lo}")
        if hi is not None and v > hi:
            raise ConfigError(f"{self.path}.{key}", f"must be <= {hi}")
        return v

    def float(self, key, default=_MISSING, positive=False) -> float:
        if key not in self.data and default is not _MISSING:
            return default
        v = self._raw(key, default)
        x = _to_float(v, f"{self.path}.{key}")
        if positive and not x > 0:
            raise ConfigError(f"{self.path}.{key}", "must be > 0")
        return x

    def floats(self, key, default=_MISSING) -> list[float]:
        if key not in self.data and default is not _MISSING:
            return default
        v = self._raw(key, default)
        if not isinstance(v, list):
            raise ConfigError(f"{self.path}.{key}", "expected a list of numbers")
        return [_to_float(x, f"{self.path}.{key}[{i}]") for i, x in enumerate(v)]

    def ints(self, key, default=_MISSING) -> list[int]:
        if key not in self.data and default is not _MISSING:
            return default
        v = self._raw(key, default)
        if not isinstance(v, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
            raise ConfigError(f"{self.path}.{key}", "expected a list of integers")
        return list(v)

    def bool(self, key, default=_MISSING) -> bool:
        if key not in self.data and default is not _MISSING:
            return default
        v = self._raw(key, default)
        if not isinstance(v, bool):
            raise ConfigError(f"{self.path}.{key}", f"expected true/false, got {v!r}")
        return v

    def strs(self, key, default=_MISSING) -> list[str]:
        if key not in self.data and default is not _MISSING:
            return default
        v = self._raw(key, default)
        if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
            raise ConfigError(f"{self.path}.{key}", "expected a list of strings")
        return list(v)


def _to_float(v, path) -> float:
    """Decimals and decimal strings both accepted; ``"0.1"`` and ``0.1`` give the same float."""
    if isinstance(v, bool):
        raise ConfigError(path, f"expected a number, got {v!r}")
    if isinstance(v, (int, Decimal)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(Decimal(v.strip()))
        except Exception:
            raise ConfigError(path, f"not a decimal number: {v!r}") from None
    if isinstance(v, float):
        return v
    raise ConfigError(path, f"expected a number, got {v!r}")


def parse_config(text: str, subcommand: str | None = None, seed: int | None = None,
                 out: str | None = None, workers: int | None = None) -> ExperimentConfig:
    """Parse TOML text; explicit arguments override the file's top-level keys."""
    try:
        body = tomllib.loads(text, parse_float=Decimal)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<config>", f"TOML syntax error: {exc}") from None
    top = Section(body, "<config>")
    sub = subcommand or top.str("subcommand", None)
    if sub is None:
        raise ConfigError("subcommand", "no subcommand given")
    if sub not in SUBCOMMANDS:
        raise ConfigError("subcommand", f"unknown subcommand {sub!r}")
    if subcommand and "subcommand" in body and body["subcommand"] != subcommand:
        raise ConfigError("subcommand", f"config is for {body['subcommand']!r}, not {subcommand!r}")
    s = seed if seed is not None else top.int("seed", 0)
    if not 0 <= s <= SEED_MAX:
        raise ConfigError("seed", "must be an unsigned 64-bit integer")
    w = workers if workers is not None else top.int("workers", 1, lo=1)
    if w < 1:
        raise ConfigError("workers", "must be >= 1")
    o = out if out is not None else top.str("out", None)
    rest = {k: v for k, v in body.items() if k not in ("subcommand", "seed", "out", "workers")}
    return ExperimentConfig(sub, rest, int(s), o, int(w))


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc}") from None
    return parse_config(text, **overrides)


# ---------------------------------------------------------------- report

@dataclass
class SeriesTable:
    columns: list[str]
    rows: list[tuple]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        x = float(v)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, Decimal):
        return str(v)
    return v


def _verdict_record(v: HierarchyVerdict) -> dict:
    return {"epsilon": v.epsilon, "levels": v.as_records(), "notes": list(v.notes),
            "inclusions_hold": v.inclusions_hold()}


@dataclass
class RunReport:
    subcommand: str
    seed: int
    config: dict
    verdicts: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    wall_time: float = 0.0
    version: str = __version__
    error: str | None = None

    def to_text(self) -> str:
        doc = {
            "schema": REPORT_SCHEMA,
            "library_version": self.version,
            "subcommand": self.subcommand,
            "seed": self.seed,
            "config": _jsonable(self.config),
            "verdicts": _jsonable(self.verdicts),
            "results": _jsonable(self.results),
            "series": {name: {"file": f"series/{name}.csv", "columns": t.columns, "rows": len(t.rows),
                              "csv_version": CSV_VERSION}
                       for name, t in self.series.items()},
            "wall_time_s": self.wall_time,
            "error": self.error,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def write(self, out_dir):
        out = Path(out_dir)
        (out / "series").mkdir(parents=True, exist_ok=True)
        for name, t in self.series.items():
            (out / "series" / f"{name}.csv").write_text(t.to_csv())
        (out / "report.txt").write_text(self.to_text())


_REPORT_KEYS = {"schema": str, "library_version": str, "subcommand": str, "seed": int, "config": dict,
                "verdicts": dict, "results": dict, "series": dict, "wall_time_s": (int, float)}
_LEVEL_KEYS = {"name": str, "passed": bool, "residual": (int, float), "epsilon": (int, float),
               "parameters": dict, "notes": list}


def parse_report(text: str) -> dict:
    """Parse and validate ``report.txt`` content; raises :class:`ConfigError` on schema violations."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("report", f"not JSON: {exc}") from None
    for key, kind in _REPORT_KEYS.items():
        if key not in doc:
            raise ConfigError(f"report.{key}", "missing")
        if not isinstance(doc[key], kind):
            raise ConfigError(f"report.{key}", f"wrong type {type(doc[key]).__name__}")
    if doc["schema"] != REPORT_SCHEMA:
        raise ConfigError("report.schema", f"unsupported schema {doc['schema']!r}")
    for label, v in doc["verdicts"].items():
        for i, lv in enumerate(v.get("levels", [])):
            for key, kind in _LEVEL_KEYS.items():
                if not isinstance(lv.get(key), kind):
                    raise ConfigError(f"report.verdicts.{label}.levels[{i}].{key}", "missing or wrong type")
            if (lv["residual"] < lv["epsilon"]) != lv["passed"]:
                raise ConfigError(f"report.verdicts.{label}.levels[{i}]", "passed disagrees with residual < epsilon")
    for name, s in doc["series"].items():
        if not isinstance(s.get("columns"), list) or not isinstance(s.get("rows"), int):
            raise ConfigError(f"report.series.{name}", "missing columns/rows")
    return doc


# ---------------------------------------------------------------- builders

def _build_map(sec: Section) -> MapSpec:
    kind = sec.str("kind", choices=("rotation", "cat", "baker", "bernoulli_shift", "identity"))
    try:
        if kind == "rotation":
            return MapSpec.rotation(sec.float("alpha"))
        if kind == "bernoulli_shift":
            return MapSpec.bernoulli_shift(sec.int("p", 2, lo=2))
        return MapSpec(kind)
    except ConfigError:
        raise
    except QEHError as exc:
        raise ConfigError(sec.path, str(exc)) from None


def _build_sets(cfg: ExperimentConfig, m: MapSpec) -> list:
    raw = cfg.body.get("sets")
    if not isinstance(raw, list) or not raw:
        raise ConfigError("sets", "need an array of [[sets]] tables")
    res = cfg.section("map").int("resolution", 5, lo=1, hi=12) if m.acts_on_grid else None
    out = []
    for i, item in enumerate(raw):
        sec = Section(item, f"sets[{i}]")
        if sec.has("arcs"):
            if m.acts_on_grid and m.kind != "identity":
                raise ConfigError(sec.path, f"{m.kind} acts on cell sets, not arcs")
            arcs = sec.data["arcs"]
            if not isinstance(arcs, list):
                raise ConfigError(f"{sec.path}.arcs", "expected a list of [a, b] pairs")
            pairs = []
            for j, ab in enumerate(arcs):
                if not isinstance(ab, list) or len(ab) != 2:
                    raise ConfigError(f"{sec.path}.arcs[{j}]", "expected [a, b]")
                pairs.append((_to_float(ab[0], f"{sec.path}.arcs[{j}][0]"), _to_float(ab[1], f"{sec.path}.arcs[{j}][1]")))
            try:
                out.append(ArcSet(pairs))
            except (QEHError, ValueError) as exc:
                raise ConfigError(f"{sec.path}.arcs", str(exc)) from None
        elif sec.has("hex"):
            if not m.acts_on_grid:
                raise ConfigError(sec.path, "rotation acts on arc sets, not cells")
            r = sec.int("resolution", res)
            if r != res:
                raise ConfigError(f"{sec.path}.resolution", f"{r} does not match map.resolution {res}")
            try:
                out.append(CellSet.from_hex(r, sec.str("hex")))
            except (QEHError, ValueError) as exc:
                raise ConfigError(f"{sec.path}.hex", str(exc)) from None
        else:
            raise ConfigError(sec.path, "each set needs 'arcs' or 'hex'")
    if len(out) < 2:
        raise ConfigError("sets", "need at least two sets")
    return out


def _build_rotator(sec: Section) -> RotatorSpec:
    try:
        return RotatorSpec(sec.float("lambda"), sec.float("tau", 1.0), sec.float("hbar_eff", 1.0),
                           sec.int("N", 255), sec.float("beta", 0.0))
    except ConfigError:
        raise
    except QEHError as exc:
        raise ConfigError(sec.path, str(exc)) from None


def _build_state(sec: Section, dim: int, seed: int, rot: RotatorSpec | None = None) -> DensityState:
    kind = sec.str("kind", "basis", choices=("basis", "momentum", "packet", "random", "maximally_mixed", "superposition"))
    if kind == "momentum":
        if rot is None:
            raise ConfigError(f"{sec.path}.kind", "momentum states need a rotator system")
        try:
            return momentum_state(rot, sec.int("n", 0))
        except IndexError as exc:
            raise ConfigError(f"{sec.path}.n", str(exc)) from None
    if kind == "packet":
        if rot is None:
            raise ConfigError(f"{sec.path}.kind", "packets need a rotator system")
        return gaussian_packet(rot, sec.float("center", 0.0), sec.float("width", 2.0, positive=True),
                               sec.float("kick", 0.0))
    if kind == "random":
        rank = sec.int("rank", dim, lo=1, hi=dim)
        return make_density(random_density(make_rng(sec.int("seed", seed)), dim, rank))
    if kind == "maximally_mixed":
        return maximally_mixed(dim)
    if kind == "superposition":
        idx = sec.ints("indices")
        if not idx or any(not 0 <= i < dim for i in idx):
            raise ConfigError(f"{sec.path}.indices", f"indices must lie in [0, {dim})")
        v = np.zeros(dim)
        v[idx] = 1
        return pure_state(v)
    i = sec.int("index", 0, lo=0, hi=dim - 1)
    v = np.zeros(dim)
    v[i] = 1
    return pure_state(v)


def _build_observables(sec: Section, dim: int, seed: int, rot: RotatorSpec | None = None) -> tuple[list, list]:
    """Observable grammar: ``identity``, ``projector:i``, ``random`` / ``random:k``,
    and for rotators ``cos``, ``window:W``, ``momentum:n``."""
    names = sec.strs("list", ["random"])
    if not names:
        raise ConfigError(f"{sec.path}.list", "need at least one observable")
    mats = []
    for j, name in enumerate(names):
        head, _, arg = name.partition(":")
        path = f"{sec.path}.list[{j}]"
        try:
            if head == "identity":
                mats.append(np.eye(dim))
            elif head == "projector":
                i = int(arg)
                if not 0 <= i < dim:
                    raise ValueError(f"index {i} outside [0, {dim})")
                m = np.zeros((dim, dim))
                m[i, i] = 1
                mats.append(m)
            elif head == "random":
                k = int(arg) if arg else j
                h = random_hermitian(make_rng(seed + 1 + k), dim)
                mats.append(h / np.abs(np.linalg.eigvalsh(h)).max())
            elif head in ("cos", "window", "momentum") and rot is None:
                raise ValueError(f"{head!r} needs a rotator system")
            elif head == "cos":
                mats.append(cos_theta(dim))
            elif head == "window":
                mats.append(momentum_window(rot, int(arg)))
            elif head == "momentum":
                m = np.zeros((dim, dim))
                i = rot.index(int(arg))
                m[i, i] = 1
                mats.append(m)
            else:
                raise ValueError(f"unknown observable {name!r}")
        except (ValueError, IndexError) as exc:
            raise ConfigError(path, str(exc)) from None
    return names, mats


def _build_quantum_system(cfg: ExperimentConfig):
    sec = cfg.section("system")
    kind = sec.str("kind", "random", choices=("random", "diagonal", "rotator"))
    rot = None
    if kind == "rotator":
        rot = _build_rotator(sec)
        u, dim = build_floquet(rot), rot.N
    elif kind == "diagonal":
        phases = sec.floats("phases")
        if not phases:
            raise ConfigError(f"{sec.path}.phases", "need at least one phase")
        u, dim = Unitary(np.diag(np.exp(1j * np.asarray(phases)))), len(phases)
    else:
        dim = sec.int("dim", 16, lo=1, hi=4096)
        u = Unitary(random_unitary(make_rng(sec.int("seed", cfg.seed)), dim))
    return u, dim, rot


# ---------------------------------------------------------------- subcommands

def _run_classify(cfg: ExperimentConfig, rep: RunReport):
    m = _build_map(cfg.section("map"))
    sets = _build_sets(cfg, m)
    ps = cfg.section("params")
    params = ClassifierParams(
        N_cesaro=ps.int("N_cesaro", 10_000, lo=1), N_mix=ps.int("N_mix", 10_000, lo=1),
        n0_K=ps.int("n0_K", 3, lo=0), r=ps.int("r", None, lo=1) if ps.has("r") else None,
        J=ps.int("J", 2, lo=1), eps=ps.float("eps", 1e-2, positive=True), seed=ps.int("seed", cfg.seed, lo=0),
    )
    v = classify_set_level(m, sets, params)
    rep.verdicts["classical"] = _verdict_record(v)
    horizon = max(params.N_mix, params.N_cesaro) + 1
    rows = []
    for j in range(1, len(sets)):
        s = correlation_series(m, sets[0], sets[j], horizon)
        rows += [(n, 0, j, float(c)) for n, c in enumerate(s)]
    rep.series["correlation"] = SeriesTable(["n", "set_a", "set_b", "correlation"], rows)
    rep.results["measures"] = [float(s.measure) for s in sets]


def _run_qeh(cfg: ExperimentConfig, rep: RunReport):
    u, dim, rot = _build_quantum_system(cfg)
    rho = _build_state(cfg.section("state"), dim, cfg.seed, rot)
    names, obs = _build_observables(cfg.section("observables"), dim, cfg.seed, rot)
    run = cfg.section("run")
    N = run.int("N", 1000, lo=2)
    eps = run.float("eps", 1e-2, positive=True)
    traj = Trajectory(rho, u)
    v = quantum_verdict(traj, obs, N, eps, J=run.int("J", 3, lo=2),
                        random_families=run.int("random_families", 1, lo=0),
                        k_points=run.int("k_points", 64, lo=2), seed=cfg.seed)
    rep.verdicts["quantum"] = _verdict_record(v)
    eq = traj.equilibrium
    rep.results["equilibrium"] = {"method": eq.method, "degenerate": eq.degenerate,
                                  "values": {n: eq.pair(o) for n, o in zip(names, obs)}}
    series = [traj.series(o, N) for o in obs]
    rep.series["expectations"] = SeriesTable(["n"] + names, [(n, *(float(s[n]) for s in series)) for n in range(N + 1)])


def _run_rotator(cfg: ExperimentConfig, rep: RunReport):
    rot = _build_rotator(cfg.section("system"))
    rho = _build_state(cfg.section("state"), rot.N, cfg.seed, rot)
    names, obs = _build_observables(cfg.section("observables"), rot.N, cfg.seed, rot)
    run = cfg.section("run")
    kicks = run.int("kicks", 100, lo=0)
    snaps = sorted(set(run.ints("snapshots", [kicks])))
    if any(not 0 <= k <= kicks for k in snaps):
        raise ConfigError("run.snapshots", f"snapshot kicks must lie in [0, {kicks}]")
    w, v = np.linalg.eigh(rho.matrix)
    keep = w > 1e-15
    w, psi = w[keep], v[:, keep]
    free, kick = rot.free_phases(), rot.kick_phases()
    rows, snap_rows, fits = [], [], {}
    for k in range(kicks + 1):
        if k:
            psi = apply_floquet(rot, psi, 1, free, kick)
        vals = [float(np.einsum("r,kr,kr->", w, psi.conj(), o @ psi).real) for o in obs]
        rows.append((k, *vals))
        if k in snaps:
            f = (np.abs(psi) ** 2) @ w
            f = f / f.sum()
            l_s, r2, _ = fit_localization(rot.momenta, f)
            fits[str(k)] = {"l_s": l_s, "fit_r2": r2, "truncated": bool(l_s > rot.N / 8)}
            snap_rows += [(k, int(n), float(p)) for n, p in zip(rot.momenta, f)]
    rep.series["expectations"] = SeriesTable(["kick"] + names, rows)
    rep.series["momentum"] = SeriesTable(["kick", "n", "probability"], snap_rows)
    rep.results["localization"] = fits
    if run.bool("regime", False):
        horizon = run.int("horizon", 10_000, lo=2)
        r = regime_report(rot, rho, obs, horizon=horizon, eps=run.float("eps", 1e-2, positive=True),
                          fit_kicks=run.int("fit_kicks", 2000, lo=0), seed=cfg.seed)
        rep.verdicts["regime"] = _verdict_record(r.verdict)
        rep.results["regime"] = {"l_s": r.l_s, "fit_r2": r.fit_r2, "decoherence_time": r.decoherence_time,
                                 "post_td_residual": r.post_td_residual, "post_td_pass": r.post_td_pass,
                                 "truncated": r.truncated, "horizon": horizon}


def _build_spectrum(cfg: ExperimentConfig) -> SpectrumSpec:
    sec = cfg.section("spectrum")
    if sec.has("energies"):
        return SpectrumSpec.from_energies(sec.floats("energies"))
    if sec.has("file"):
        try:
            return SpectrumSpec.from_text(Path(sec.str("file")).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{sec.path}.file", str(exc)) from None
    return random_spectrum(make_rng(sec.int("seed", cfg.seed)), sec.int("levels", 32, lo=2),
                           sec.float("spread", 1.0, positive=True))


def _run_dephasing(cfg: ExperimentConfig, rep: RunReport):
    spec = _build_spectrum(cfg)
    sec = cfg.section("spectrum")
    if sec.bool("inject_degeneracy", False):
        e = np.array(spec.energies)
        e[1] = e[0]
        spec = SpectrumSpec.from_energies(e)
    L = len(spec)
    rho = coherent_state(make_rng(cfg.section("state").int("seed", cfg.seed + 1)), L)
    proj = np.full((L, L), 1.0 / L)
    split = amplitude_series(spec, rho, proj, [0.0])
    run = cfg.section("run")
    hs = run.floats("horizons", [10.0 * 2 ** k for k in range(12)])
    if any(h <= 0 for h in hs):
        raise ConfigError("run.horizons", "horizons must be positive")
    res = cesaro_residual(split, hs)
    rows = []
    for h, r in zip(hs, res):
        c = cesaro_average(split, h) if not spec.degenerate else None
        rows.append((h, float(r), c.bound if c else float("nan")))
    rep.series["cesaro_residual"] = SeriesTable(["T", "residual", "bound"], rows)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        final = cesaro_average(split, hs[-1])
    rep.results["dephasing"] = {"levels": L, "min_gap": spec.min_gap, "degenerate": spec.degenerate,
                                "p_diag": split.p_diag, "plateau": final.plateau,
                                "degenerate_pairs": [list(p) for p in final.degenerate_pairs]}
    qi = cfg.section("interference")
    width = qi.float("width", 1.0, positive=True)
    xs = qi.floats("x", [0.0, 0.5, 1.0, 2.0, 4.0, 10.0])
    samples = qi.int("samples", 4096, lo=4096)
    g = lambda k: np.exp(-0.5 * (k / width) ** 2)
    p0 = quasi_continuous_interference(g, 0.0, width=width, samples=samples)
    rows = []
    for x in xs:
        if x < 0:
            raise ConfigError("interference.x", "x must be nonnegative")
        val = quasi_continuous_interference(g, x / width, width=width, samples=samples)
        rows.append((x, val, gaussian_interference(x / width, width, samples), val / p0, math.exp(-0.5 * x * x)))
    rep.series["interference"] = SeriesTable(["x_widths", "abs_p_int", "analytic", "normalized", "analytic_normalized"], rows)
    rep.results["interference"] = {"samples": samples, "span_widths": 6.0, "width": width}


def _run_wigner(cfg: ExperimentConfig, rep: RunReport):
    run = cfg.section("run")
    dims = run.ints("dims", [3, 5, 15, 31])
    pairs = run.int("pairs", 100, lo=1)
    rows = []
    for N in dims:
        if N < 1 or N % 2 == 0:
            raise ConfigError("run.dims", f"dimensions must be odd and positive, got {N}")
        rng = make_rng(cfg.seed + N)
        worst_pair = worst_rt = worst_prod = 0.0
        for _ in range(pairs):
            a, b = random_hermitian(rng, N), random_hermitian(rng, N)
            worst_pair = max(worst_pair, pairing_check(a, b))
            worst_rt = max(worst_rt, float(np.abs(inverse_weyl(wigner_transform(a)) - a).max()))
            worst_prod = max(worst_prod, product_symbol_discrepancy(a, b))
        rho = random_density(rng, N)
        rows.append((N, pairs, worst_pair, worst_rt, wigner_transform(rho).mean() * N, worst_prod))
    rep.series["wigner"] = SeriesTable(["N", "pairs", "max_pairing_residual", "max_roundtrip_residual",
                                        "symbol_mean_times_N", "max_product_discrepancy"], rows)
    rep.results["wigner"] = {"max_pairing_residual": max(r[2] for r in rows),
                             "max_roundtrip_residual": max(r[3] for r in rows)}


_RUNNERS = {
    "classify-map": _run_classify,
    "qeh-test": _run_qeh,
    "kicked-rotator": _run_rotator,
    "dephasing": _run_dephasing,
    "wigner-check": _run_wigner,
}


def run(config: ExperimentConfig, write: bool = True) -> RunReport:
    """Dispatch one experiment; writes ``report.txt`` and ``series/*.csv`` when ``config.out`` is set."""
    if config.subcommand == "sweep":
        reports = sweep(expand_sweep(config), workers=config.workers)
        rep = _merge_sweep(config, reports)
    else:
        rep = RunReport(config.subcommand, config.seed, config.body)
        t0 = time.perf_counter()
        try:
            _RUNNERS[config.subcommand](config, rep)
        except ConfigError:
            raise
        except QEHError as exc:
            raise ExperimentError(f"{config.subcommand} (seed {config.seed})", exc) from exc
        rep.wall_time = time.perf_counter() - t0
    if write and config.out:
        rep.write(config.out)
    return rep


def _run_job(config: ExperimentConfig) -> RunReport:
    try:
        return run(replace(config, out=None), write=False)
    except (QEHError, ValueError) as exc:
        rep = RunReport(config.subcommand, config.seed, config.body)
        rep.error = f"{type(exc).__name__}: {exc}"
        return rep


def sweep(configs, workers: int = 1) -> list[RunReport]:
    """Run ``configs`` (nested sweeps not allowed) and return reports in input order.

    Per-job errors are recorded on that job's report; the sweep continues.
    """
    configs = list(configs)
    if not configs:
        raise ConfigError("sweep", "no jobs")
    for i, c in enumerate(configs):
        if c.subcommand == "sweep":
            raise ConfigError(f"jobs[{i}]", "nested sweeps are not supported")
    if workers <= 1 or len(configs) == 1:
        return [_run_job(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, configs))


def _set_path(body: dict, dotted: str, value):
    keys = dotted.split(".")
    node = body
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(dotted, f"{k} is not a table")
    node[keys[-1]] = value


def expand_sweep(config: ExperimentConfig) -> list[ExperimentConfig]:
    """Jobs from ``[[jobs]]`` tables, or from ``[base]`` plus ``[sweep] parameter/values``."""
    import copy

    body = config.body
    jobs = []
    if "jobs" in body:
        if not isinstance(body["jobs"], list) or not body["jobs"]:
            raise ConfigError("jobs", "need a nonempty array of [[jobs]] tables")
        for i, j in enumerate(body["jobs"]):
            sec = Section(j, f"jobs[{i}]")
            sub = sec.str("subcommand", choices=SUBCOMMANDS[:-1])
            seed = sec.int("seed", config.seed, lo=0, hi=SEED_MAX)
            rest = {k: v for k, v in j.items() if k not in ("subcommand", "seed")}
            jobs.append(ExperimentConfig(sub, rest, seed))
        return jobs
    base = Section(body.get("base", {}), "base")
    sub = base.str("subcommand", choices=SUBCOMMANDS[:-1])
    sw = Section(body.get("sweep", {}), "sweep")
    param = sw.str("parameter")
    values = sw._raw("values", _MISSING)
    if not isinstance(values, list) or not values:
        raise ConfigError("sweep.values", "need a nonempty list")
    for v in values:
        b = copy.deepcopy({k: x for k, x in base.data.items() if k != "subcommand"})
        _set_path(b, param, v)
        jobs.append(ExperimentConfig(sub, b, config.seed))
    return jobs


def _merge_sweep(config: ExperimentConfig, reports: list[RunReport]) -> RunReport:
    rep = RunReport("sweep", config.seed, config.body)
    param = config.body.get("sweep", {}).get("parameter", "")
    rows = []
    for i, r in enumerate(reports):
        value = _lookup(r.config, param) if param else ""
        rep.results[f"job_{i:03d}"] = {"subcommand": r.subcommand, "error": r.error, "results": r.results,
                                        "parameter_value": value}
        for label, v in r.verdicts.items():
            rep.verdicts[f"job_{i:03d}.{label}"] = v
            rows.append((i, str(value),
                         label, *[lv["passed"] for lv in v["levels"]], *[lv["residual"] for lv in v["levels"]]))
        if r.error:
            rows.append((i, str(value), "error", *([""] * 8)))
        for name, t in r.series.items():
            rep.series[f"job_{i:03d}_{name}"] = t
        rep.wall_time += r.wall_time
    rep.series["sweep"] = SeriesTable(
        ["job", "parameter_value", "verdict", "ergodic", "mixing", "kolmogorov", "bernoulli",
         "ergodic_residual", "mixing_residual", "kolmogorov_residual", "bernoulli_residual"], rows)
    return rep


def _lookup(body, dotted):
    node = body
    for k in dotted.split("."):
        if not isinstance(node, dict) or k not in node:
            return ""
        node = node[k]
    return node
