"""Scenario configuration, figure presets, the pipeline runner and sweeps.

A scenario is a JSON document::

    {
      "name": "fig6",
      "mode": "dimensionless",
      "model": {"chi": 1.0, "Omega": 0.25, "kappa": 0.5},
      "damping": {"gamma_a": 0.001, "gamma_b": 0.01},
      "initial": {"alpha0_re": 2.0, "alpha0_im": 0.0, "beta0_re": 2.0, "beta0_im": 0.0},
      "time": {"t_max": 60.0, "n_points": 6001},
      "outputs": ["p_minus", "decoherence"]
    }

In ``device-units`` mode a ``device`` section replaces ``model`` and the
couplings are derived from it (rates in rad/s, time in seconds).
"""

from __future__ import annotations

import copy
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import __version__
from .coherent import InitialAmplitudes, evolve_amplitudes
from .dissipative import (
    DampingParams,
    damped_amplitudes_closed,
    decoherence_f,
    short_time_visibility,
)
from .errors import ConfigError, DomainError, NemscatError
from .oracle import FockTruncation, run_oracle
from .params import HBAR, DeviceParams, EffectiveModel, effective_model, raw_couplings

OUTPUT_KINDS = ("trajectory", "decoherence", "p_minus", "oracle_compare", "orbits")
PRESET_NAMES = ("fig2", "fig3-orbits", "fig4", "fig5", "fig6")
MODES = ("dimensionless", "device-units")

_DEVICE_KEYS = tuple(f.name for f in fields(DeviceParams))
_MODEL_DIRECT = ("chi", "Omega", "kappa")
_MODEL_DERIVED = ("g", "lambda", "delta")


@dataclass(frozen=True)
class TimeGrid:
    t_max: float
    n_points: int

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_points)


@dataclass(frozen=True)
class OracleSpec:
    n_a: int = 16
    n_b: int = 16
    dt: float = 0.0025


@dataclass(frozen=True)
class CompareModel:
    label: str
    chi: float
    Omega: float
    kappa: float


@dataclass(frozen=True)
class ScenarioConfig:
    mode: str
    damping: DampingParams
    initial: InitialAmplitudes
    time: TimeGrid
    outputs: tuple[str, ...] = ()
    model: dict | None = None
    device: DeviceParams | None = None
    oracle: OracleSpec | None = None
    compare_models: tuple[CompareModel, ...] = ()
    name: str | None = None

    def effective(self) -> EffectiveModel:
        if self.mode == "device-units":
            raw = raw_couplings(self.device)
            return effective_model(raw.g, raw.lam, self.device.delta)
        m = self.model
        if "chi" in m:
            return effective_model(chi=m["chi"], Omega=m["Omega"], kappa=m["kappa"])
        return effective_model(m["g"], m["lambda"], m["delta"])

    def to_dict(self) -> dict:
        d: dict = {"mode": self.mode}
        if self.name is not None:
            d["name"] = self.name
        if self.model is not None:
            d["model"] = dict(self.model)
        if self.device is not None:
            d["device"] = {k: v for k, v in vars(self.device).items() if v is not None}
        d["damping"] = {
            "gamma_a": self.damping.gamma_a,
            "gamma_b": self.damping.gamma_b,
            "gamma_qubit": self.damping.gamma_qubit,
        }
        d["initial"] = {
            "alpha0_re": self.initial.alpha0.real,
            "alpha0_im": self.initial.alpha0.imag,
            "beta0_re": self.initial.beta0.real,
            "beta0_im": self.initial.beta0.imag,
        }
        d["time"] = {"t_max": self.time.t_max, "n_points": self.time.n_points}
        if self.oracle is not None:
            d["oracle"] = {"n_a": self.oracle.n_a, "n_b": self.oracle.n_b, "dt": self.oracle.dt}
        if self.compare_models:
            d["compare_models"] = [vars(c).copy() for c in self.compare_models]
        d["outputs"] = list(self.outputs)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


# -- parsing -----------------------------------------------------------------


def _section(d: dict, key: str, allowed, required=()) -> dict:
    sec = d[key]
    if not isinstance(sec, dict):
        raise ConfigError(f"'{key}' must be an object")
    for k in sec:
        if k not in allowed:
            raise ConfigError(f"unknown key '{key}.{k}' (allowed: {', '.join(allowed)})")
    for k in required:
        if k not in sec:
            raise ConfigError(f"missing key '{key}.{k}'")
    return sec


def _number(path: str, v, integer: bool = False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"'{path}' must be a number, got {v!r}")
    if integer:
        if isinstance(v, float) and not v.is_integer():
            raise ConfigError(f"'{path}' must be an integer, got {v!r}")
        return int(v)
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(f"'{path}' must be finite")
    return v


def config_from_dict(d: dict) -> ScenarioConfig:
    """Validate a parsed JSON document and build a ScenarioConfig."""
    if not isinstance(d, dict):
        raise ConfigError("config root must be an object")
    top = ("name", "mode", "model", "device", "damping", "initial", "time", "oracle", "outputs", "compare_models")
    for k in d:
        if k not in top:
            raise ConfigError(f"unknown key '{k}' (allowed: {', '.join(top)})")
    for k in ("mode", "initial", "time"):
        if k not in d:
            raise ConfigError(f"missing key '{k}'")
    mode = d["mode"]
    if mode not in MODES:
        raise ConfigError(f"'mode' must be one of {MODES}, got {mode!r}")

    model = device = None
    if mode == "dimensionless":
        if "device" in d:
            raise ConfigError("'device' is not allowed in dimensionless mode (exactly one parameter source)")
        if "model" not in d:
            raise ConfigError("missing key 'model'")
        sec = _section(d, "model", _MODEL_DIRECT + _MODEL_DERIVED)
        keys = set(sec)
        if keys == set(_MODEL_DIRECT):
            model = {k: _number(f"model.{k}", sec[k]) for k in _MODEL_DIRECT}
        elif keys == set(_MODEL_DERIVED):
            model = {k: _number(f"model.{k}", sec[k]) for k in _MODEL_DERIVED}
            if model["delta"] == 0:
                raise ConfigError("'model.delta' must be non-zero")
        else:
            raise ConfigError("'model' needs exactly {chi, Omega, kappa} or exactly {g, lambda, delta}")
    else:
        if "model" in d:
            raise ConfigError("'model' is not allowed in device-units mode (exactly one parameter source)")
        if "device" not in d:
            raise ConfigError("missing key 'device'")
        sec = _section(d, "device", _DEVICE_KEYS, ("E_C", "E_J", "n_g0", "m", "nu", "d", "delta"))
        try:
            device = DeviceParams(**{k: _number(f"device.{k}", v) for k, v in sec.items()})
        except DomainError as exc:
            raise ConfigError(f"device: {exc}") from exc

    damping = DampingParams()
    if "damping" in d:
        sec = _section(d, "damping", ("gamma_a", "gamma_b", "gamma_qubit"))
        try:
            damping = DampingParams(**{k: _number(f"damping.{k}", v) for k, v in sec.items()})
        except DomainError as exc:
            raise ConfigError(f"damping: {exc}") from exc

    ikeys = ("alpha0_re", "alpha0_im", "beta0_re", "beta0_im")
    sec = _section(d, "initial", ikeys)
    iv = {k: _number(f"initial.{k}", sec.get(k, 0.0)) for k in ikeys}
    initial = InitialAmplitudes(complex(iv["alpha0_re"], iv["alpha0_im"]), complex(iv["beta0_re"], iv["beta0_im"]))

    sec = _section(d, "time", ("t_max", "n_points"), ("t_max", "n_points"))
    t_max = _number("time.t_max", sec["t_max"])
    n_points = _number("time.n_points", sec["n_points"], integer=True)
    if n_points < 2:
        raise ConfigError(f"'time.n_points' must be >= 2, got {n_points}")
    if not t_max > 0:
        raise ConfigError(f"'time.t_max' must be > 0 so the grid is strictly increasing, got {t_max}")

    oracle = None
    if "oracle" in d:
        sec = _section(d, "oracle", ("n_a", "n_b", "dt"))
        spec = {}
        for k in ("n_a", "n_b"):
            if k in sec:
                spec[k] = _number(f"oracle.{k}", sec[k], integer=True)
                if spec[k] < 2:
                    raise ConfigError(f"'oracle.{k}' must be >= 2")
        if "dt" in sec:
            spec["dt"] = _number("oracle.dt", sec["dt"])
            if not spec["dt"] > 0:
                raise ConfigError("'oracle.dt' must be > 0")
        oracle = OracleSpec(**spec)

    outputs = d.get("outputs", [])
    if not isinstance(outputs, list):
        raise ConfigError("'outputs' must be a list")
    for o in outputs:
        if o not in OUTPUT_KINDS:
            raise ConfigError(f"unknown output kind {o!r} in 'outputs' (allowed: {', '.join(OUTPUT_KINDS)})")
    if len(set(outputs)) != len(outputs):
        raise ConfigError("'outputs' contains duplicates")

    compare = []
    for n, item in enumerate(d.get("compare_models", [])):
        if not isinstance(item, dict):
            raise ConfigError(f"'compare_models[{n}]' must be an object")
        allowed = ("label", "chi", "Omega", "kappa")
        for k in item:
            if k not in allowed:
                raise ConfigError(f"unknown key 'compare_models[{n}].{k}'")
        for k in allowed:
            if k not in item:
                raise ConfigError(f"missing key 'compare_models[{n}].{k}'")
        label = item["label"]
        if not isinstance(label, str) or not label.isidentifier():
            raise ConfigError(f"'compare_models[{n}].label' must be an identifier")
        compare.append(
            CompareModel(label, *(_number(f"compare_models[{n}].{k}", item[k]) for k in allowed[1:]))
        )

    name = d.get("name")
    if name is not None and not isinstance(name, str):
        raise ConfigError("'name' must be a string")
    return ScenarioConfig(
        mode=mode,
        damping=damping,
        initial=initial,
        time=TimeGrid(t_max, n_points),
        outputs=tuple(outputs),
        model=model,
        device=device,
        oracle=oracle,
        compare_models=tuple(compare),
        name=name,
    )


def parse_config(path) -> ScenarioConfig:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON: {exc}") from exc
    return config_from_dict(doc)


# -- presets -----------------------------------------------------------------


def _preset_dict(name: str) -> dict:
    zero = {"gamma_a": 0.0, "gamma_b": 0.0, "gamma_qubit": 0.0}
    symmetric = {"chi": 1.0, "Omega": 1.0, "kappa": 1.0}
    b4 = {"alpha0_re": 0.0, "alpha0_im": 0.0, "beta0_re": 4.0, "beta0_im": 0.0}
    b2 = {"alpha0_re": 0.0, "alpha0_im": 0.0, "beta0_re": 2.0, "beta0_im": 0.0}
    # the chi = Omega = 0 exchange-only variant rides along as a compare model
    exchange_only = [{"label": "pure_exchange", "chi": 0.0, "Omega": 0.0, "kappa": 1.0}]
    if name == "fig2":
        return {"name": name, "mode": "dimensionless", "model": symmetric, "damping": zero, "initial": b4,
                "time": {"t_max": 2 * math.pi, "n_points": 2001}, "outputs": ["p_minus"]}
    if name == "fig3-orbits":
        return {"name": name, "mode": "dimensionless", "model": symmetric, "damping": zero, "initial": b4,
                "time": {"t_max": math.pi, "n_points": 401}, "outputs": ["orbits"]}
    if name == "fig4":
        return {"name": name, "mode": "dimensionless", "model": symmetric,
                "damping": {"gamma_a": 0.1, "gamma_b": 0.1, "gamma_qubit": 0.0}, "initial": b2,
                "time": {"t_max": 1.0, "n_points": 201}, "outputs": ["decoherence"], "compare_models": exchange_only}
    if name == "fig5":
        return {"name": name, "mode": "dimensionless", "model": symmetric,
                "damping": {"gamma_a": 0.1, "gamma_b": 0.1, "gamma_qubit": 0.0}, "initial": b2,
                "time": {"t_max": 10.0, "n_points": 1001}, "outputs": ["decoherence"], "compare_models": exchange_only}
    if name == "fig6":
        return {"name": name, "mode": "dimensionless", "model": {"chi": 1.0, "Omega": 0.25, "kappa": 0.5},
                "damping": {"gamma_a": 0.001, "gamma_b": 0.01, "gamma_qubit": 0.0},
                "initial": {"alpha0_re": 2.0, "alpha0_im": 0.0, "beta0_re": 2.0, "beta0_im": 0.0},
                "time": {"t_max": 60.0, "n_points": 6001}, "outputs": ["p_minus"]}
    raise ConfigError(f"unknown preset {name!r}; valid presets: {', '.join(PRESET_NAMES)}")


def figure_preset(name: str) -> ScenarioConfig:
    return config_from_dict(_preset_dict(name))


def reference_device() -> DeviceParams:
    """Order-of-magnitude device estimates for the resonator / cavity / CPB scheme.

    g is taken directly (6 MHz); E_J is not constrained by the estimates and
    only affects the gap, so it is set equal to E_C.
    """
    e_c = 5e9 * HBAR
    return DeviceParams(E_C=e_c, E_J=e_c, n_g0=0.5, m=1e-21, nu=1e9, d=20e-9, delta=1e6, g=6e6)


# -- running -----------------------------------------------------------------


def format_csv(header, columns) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    cols = [np.asarray(c, dtype=float) for c in columns]
    for row in zip(*cols):
        buf.write(",".join(format(float(v), ".17g") for v in row) + "\n")
    return buf.getvalue()


def parse_csv(payload: str) -> dict[str, np.ndarray]:
    lines = [ln for ln in payload.splitlines() if ln.strip()]
    if len(lines) < 2:
        raise ValueError("CSV payload has no data rows")
    header = lines[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    return {h: data[:, i] for i, h in enumerate(header)}


def _amplitudes(cfg: ScenarioConfig, model: EffectiveModel, t):
    d = cfg.damping
    if d.gamma_a == 0 and d.gamma_b == 0:
        ap, bp = evolve_amplitudes(cfg.initial, model, t, "plus")
        am, bm = evolve_amplitudes(cfg.initial, model, t, "minus")
    else:
        ap, bp = damped_amplitudes_closed(cfg.initial, model, d, t, "plus")
        am, bm = damped_amplitudes_closed(cfg.initial, model, d, t, "minus")
    return ap, bp, am, bm


def _log_f(cfg: ScenarioConfig, model: EffectiveModel, t):
    d = cfg.damping
    if d.gamma_a == 0 and d.gamma_b == 0:
        return -d.gamma_qubit * t + 0j
    return decoherence_f(t, cfg.initial, model, d).log_f


def _out_trajectory(cfg, model, t):
    ap, bp, am, bm = _amplitudes(cfg, model, t)
    header = ["t", "re_alpha_plus", "im_alpha_plus", "re_beta_plus", "im_beta_plus",
              "re_alpha_minus", "im_alpha_minus", "re_beta_minus", "im_beta_minus", "norm_plus", "norm_minus"]
    cols = [t, ap.real, ap.imag, bp.real, bp.imag, am.real, am.imag, bm.real, bm.imag,
            np.abs(ap) ** 2 + np.abs(bp) ** 2, np.abs(am) ** 2 + np.abs(bm) ** 2]
    return format_csv(header, cols)


def _out_orbits(cfg, model, t):
    ap, bp, am, bm = _amplitudes(cfg, model, t)
    header = ["t", "re_alpha_plus", "im_alpha_plus", "re_alpha_minus", "im_alpha_minus",
              "re_beta_plus", "im_beta_plus", "re_beta_minus", "im_beta_minus"]
    cols = [t, ap.real, ap.imag, am.real, am.imag, bp.real, bp.imag, bm.real, bm.imag]
    return format_csv(header, cols)


def _out_p_minus(cfg, model, t):
    ap, bp, am, bm = _amplitudes(cfg, model, t)
    log_f = _log_f(cfg, model, t)
    dist2 = np.abs(ap - am) ** 2 + np.abs(bp - bm) ** 2
    log_vis = log_f.real - 0.5 * dist2
    phase = log_f.imag + np.imag(np.conj(ap) * am + np.conj(bp) * bm)
    vis = np.exp(log_vis)
    p = 0.5 * (1.0 + vis * np.cos(phase))
    return format_csv(["t", "p_minus", "visibility", "phase"], [t, p, vis, phase])


def _out_decoherence(cfg, model, t):
    log_f = _log_f(cfg, model, t)
    f = np.exp(log_f)
    d = cfg.damping
    B = math.sqrt(cfg.initial.energy)
    short = short_time_visibility(t, B, model.kappa, 0.5 * (d.gamma_a + d.gamma_b))
    header = ["t", "re_f", "im_f", "abs_f2", "re_log_f", "im_log_f", "abs_f2_short"]
    cols = [t, f.real, f.imag, np.exp(2 * log_f.real), log_f.real, log_f.imag, short]
    for cm in cfg.compare_models:
        other = effective_model(chi=cm.chi, Omega=cm.Omega, kappa=cm.kappa)
        header.append(f"abs_f2_{cm.label}")
        cols.append(np.exp(2 * _log_f(cfg, other, t).real))
    return format_csv(header, cols)


def _out_oracle(cfg, model, t):
    spec = cfg.oracle or OracleSpec()
    rep = run_oracle(cfg.initial, model, cfg.damping, FockTruncation(spec.n_a, spec.n_b), t, spec.dt)
    header = ["t", "re_f_num", "im_f_num", "re_f_closed", "im_f_closed", "abs_err_f",
              "p_minus_num", "p_minus_closed", "fidelity_pp", "fidelity_mm"]
    cols = [t, rep.f_numeric.real, rep.f_numeric.imag, rep.f_closed.real, rep.f_closed.imag, rep.abs_err_f,
            rep.p_minus_numeric, rep.p_minus_closed, rep.ansatz_fidelity_pp, rep.ansatz_fidelity_mm]
    return format_csv(header, cols)


_RUNNERS = {
    "trajectory": _out_trajectory,
    "orbits": _out_orbits,
    "p_minus": _out_p_minus,
    "decoherence": _out_decoherence,
    "oracle_compare": _out_oracle,
}

PLOT_COLUMNS = {
    "trajectory": ["norm_plus", "norm_minus"],
    "p_minus": ["p_minus"],
    "decoherence": ["abs_f2", "abs_f2_short"],
    "oracle_compare": ["p_minus_num", "p_minus_closed"],
}


@dataclass
class ScenarioResult:
    payloads: dict[str, str] = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    """Run each requested output in declaration order; CSV payloads keyed by output kind."""
    start = time.perf_counter()
    result = ScenarioResult()
    t = cfg.time.grid()
    model = cfg.effective()
    for kind in cfg.outputs:
        try:
            result.payloads[kind] = _RUNNERS[kind](cfg, model, t)
        except NemscatError as exc:
            exc.args = (f"[{cfg.name or 'scenario'} / {kind}] {exc}",) + exc.args[1:]
            raise
    result.manifest = {
        "name": cfg.name,
        "config_sha256": cfg.digest(),
        "tool_version": __version__,
        "outputs": list(cfg.outputs),
        "wall_time_s": time.perf_counter() - start,
    }
    return result


def set_path(d: dict, path: str, value: float) -> dict:
    """Copy of a config dict with the scalar at dotted ``path`` replaced."""
    out = copy.deepcopy(d)
    node = out
    parts = path.split(".")
    for p in parts[:-1]:
        if not isinstance(node, dict) or p not in node:
            raise ConfigError(f"sweep path {path!r} does not exist")
        node = node[p]
    last = parts[-1]
    if not isinstance(node, dict) or last not in node:
        raise ConfigError(f"sweep path {path!r} does not exist")
    if isinstance(node[last], bool) or not isinstance(node[last], (int, float)):
        raise ConfigError(f"sweep path {path!r} does not address a scalar")
    node[last] = value
    return out


def first_revival(t, p, threshold: float = 0.75):
    """(time, height) of the first P- maximum after the signal first collapses below ``threshold``."""
    t = np.asarray(t)
    p = np.asarray(p)
    below = np.nonzero(p < threshold)[0]
    if below.size == 0:
        return math.nan, math.nan
    above = np.nonzero(p[below[0]:] >= threshold)[0]
    if above.size == 0:
        return math.nan, math.nan
    i = below[0] + above[0]
    while i + 1 < p.size and p[i + 1] >= p[i]:
        i += 1
    if i == p.size - 1:
        return math.nan, math.nan
    return float(t[i]), float(p[i])


def worker_count() -> int:
    raw = os.environ.get("NEMSCAT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"NEMSCAT_THREADS must be an integer, got {raw!r}") from None


def sweep(cfg: ScenarioConfig, param_path: str, start: float, stop: float, steps: int) -> ScenarioResult:
    """Re-run ``cfg`` with ``param_path`` stepped linearly from ``start`` to ``stop``.

    ``param_path`` may list several comma-separated paths that all take the
    same value, e.g. ``model.chi,model.Omega,model.kappa`` to stay on the
    symmetric family. The leading CSV column is named after the first path.
    """
    if steps < 2:
        raise ConfigError(f"sweep needs steps >= 2, got {steps}")
    paths = [p.strip() for p in param_path.split(",")]
    values = np.linspace(start, stop, steps)
    base = cfg.to_dict()
    cfgs = []
    for v in values:
        d = base
        for p in paths:
            d = set_path(d, p, float(v))
        cfgs.append(config_from_dict(d))
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = list(pool.map(run_scenario, cfgs))

    out = ScenarioResult()
    column = paths[0].replace(".", "_")
    for kind in cfg.outputs:
        header = None
        body = []
        for v, res in zip(values, results):
            lines = res.payloads[kind].splitlines()
            header = f"{column},{lines[0]}"
            prefix = format(float(v), ".17g")
            body.extend(f"{prefix},{ln}" for ln in lines[1:])
        out.payloads[kind] = "\n".join([header, *body]) + "\n"
    if "p_minus" in cfg.outputs:
        rev_t, rev_h = [], []
        for res in results:
            cols = parse_csv(res.payloads["p_minus"])
            tr, hr = first_revival(cols["t"], cols["p_minus"])
            rev_t.append(tr)
            rev_h.append(hr)
        out.payloads["sweep_summary"] = format_csv(
            [column, "first_revival_time", "first_revival_height"], [values, rev_t, rev_h]
        )
    out.manifest = {
        "name": cfg.name,
        "config_sha256": cfg.digest(),
        "tool_version": __version__,
        "sweep": {"path": param_path, "from": start, "to": stop, "steps": steps},
        "runs": [r.manifest["config_sha256"] for r in results],
    }
    return out


def with_outputs(cfg: ScenarioConfig, outputs) -> ScenarioConfig:
    return replace(cfg, outputs=tuple(outputs))
