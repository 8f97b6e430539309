"""Experiment orchestration: phi sweeps, residuals against the claimed rate,
CHSH reports, run manifests and the assembled run report."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Callable, Iterable, Sequence

import jsonschema
import numpy as np

from . import __version__
from .bounds import REFERENCE_LIMITS, BoundReport, chsh_max
from .integrate import (
    ALL_MODES,
    Interpretation,
    coincidence_integrals,
    coincidence_rates,
    mc_coincidence_rates,
)
from .qm import qm_correlation, qm_joint_probability
from .quadrature import QuadratureSpec
from .sampling import McSpec

ENGINES = ("qm", "quad", "mc")
NO_MODE = "none"
CSV_COLUMNS = ("phi_rad", "engine", "mode", "value", "std_error")
QUAD_CLAIM_ATOL = 1e-8
QM_CLAIM_ATOL = 1e-12
MC_CLAIM_Z = 4.0

CORRELATION_REDUCTION = (
    "E(phi) = [C(phi) - C(phi + pi/2)] / [C(phi) + C(phi + pi/2)], from the four exit-channel "
    "coincidences C(++) = C(--) = C(phi), C(+-) = C(-+) = C(phi + pi/2), with C the mode's "
    "coincidence integral (quadrature). Extension of the single-channel model, not part of it."
)


class ConfigurationError(ValueError):
    pass


class ManifestMismatch(RuntimeError):
    pass


def claimed_rate(phi):
    """The normalized coincidence rate the model is claimed to yield: sin(phi)^2 / 2."""
    return 0.5 * np.sin(np.asarray(phi, dtype=float)) ** 2


def default_phi_grid(steps: int = 181) -> np.ndarray:
    if steps < 1:
        raise ConfigurationError("phi grid needs at least one point")
    return np.linspace(0.0, math.pi, steps) if steps > 1 else np.zeros(1)


# --- curves ------------------------------------------------------------------


@dataclass(frozen=True)
class CurveRecord:
    phi_rad: float
    engine: str
    mode: str
    value: float
    std_error: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in CSV_COLUMNS}


@dataclass
class CorrelationCurve:
    phis: np.ndarray
    records: list[CurveRecord]
    config_digest: str = ""

    def __post_init__(self):
        self.phis = np.asarray(self.phis, dtype=float)
        if len(self.phis) > 1 and not np.all(np.diff(self.phis) > 0):
            raise ConfigurationError("phi grid must be strictly increasing")
        counts: dict[tuple[str, str], int] = {}
        for r in self.records:
            counts[(r.engine, r.mode)] = counts.get((r.engine, r.mode), 0) + 1
        for key, count in counts.items():
            if count != len(self.phis):
                raise ConfigurationError(f"series {key} has {count} points, grid has {len(self.phis)}")

    def series_keys(self) -> list[tuple[str, str]]:
        seen: dict[tuple[str, str], None] = {}
        for r in self.records:
            seen.setdefault((r.engine, r.mode), None)
        return list(seen)

    def series(self, engine: str, mode: str = NO_MODE) -> tuple[np.ndarray, np.ndarray]:
        rows = [r for r in self.records if r.engine == engine and r.mode == mode]
        if not rows:
            raise KeyError((engine, mode))
        return np.array([r.value for r in rows]), np.array([r.std_error for r in rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow([repr(r.phi_rad), r.engine, r.mode, repr(r.value), repr(r.std_error)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"config_digest": self.config_digest,
                           "curves": [r.to_dict() for r in self.records]}, indent=1) + "\n"

    @classmethod
    def from_records(cls, rows: Iterable[dict], config_digest: str = "") -> CorrelationCurve:
        records = [CurveRecord(float(r["phi_rad"]), r["engine"], r["mode"],
                               float(r["value"]), float(r["std_error"])) for r in rows]
        phis = sorted({r.phi_rad for r in records})
        return cls(np.array(phis), records, config_digest)

    @classmethod
    def from_csv(cls, text: str, config_digest: str = "") -> CorrelationCurve:
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ConfigurationError(f"unexpected CSV columns {reader.fieldnames}")
        return cls.from_records(reader, config_digest)


def _combos(engines: Sequence[str], modes: Sequence) -> list[tuple[str, Interpretation | None]]:
    out = []
    for engine in engines:
        if engine not in ENGINES:
            raise ConfigurationError(f"unknown engine {engine!r}; choose from {ENGINES}")
        if engine == "qm":
            out.append(("qm", None))
        else:
            out.extend((engine, Interpretation.parse(m)) for m in modes)
    return out


def sweep(phis, engines: Sequence[str] = ENGINES, modes: Sequence = ALL_MODES,
          q: QuadratureSpec = QuadratureSpec(), mc: McSpec = McSpec(),
          combos: Sequence[tuple[str, Any]] | None = None,
          config_digest: str = "", workers: int = 1) -> CorrelationCurve:
    """Evaluate every requested engine/mode pair on ``phis``.

    The ``qm`` engine reports the joint probability and takes no mode; the
    model engines report the normalized coincidence rate.
    """
    phis = np.asarray(phis, dtype=float)
    if phis.size == 0 or not engines:
        raise ConfigurationError("sweep needs a nonempty grid and engine set")
    if combos is None:
        combos = _combos(engines, modes)
    else:
        checked = []
        for engine, mode in combos:
            if engine == "qm" and mode not in (None, NO_MODE):
                raise ConfigurationError("the qm engine takes no interpretation mode")
            if engine != "qm" and mode in (None, NO_MODE):
                raise ConfigurationError(f"engine {engine!r} requires an interpretation mode")
            checked.extend(_combos([engine], [] if engine == "qm" else [mode]))
        combos = checked
    records: list[CurveRecord] = []
    for engine, mode in combos:
        if engine == "qm":
            values, errors = qm_joint_probability(phis), np.zeros(len(phis))
        elif engine == "quad":
            values, errors = coincidence_rates(phis, q, mode), np.zeros(len(phis))
        else:
            values, errors = mc_coincidence_rates(phis, mc, mode, q, workers)
        label = NO_MODE if mode is None else mode.value
        records.extend(CurveRecord(float(p), engine, label, float(v), float(e))
                       for p, v, e in zip(phis, values, errors))
    return CorrelationCurve(phis, records, config_digest)


# --- residuals ---------------------------------------------------------------


def _norms(r: np.ndarray) -> tuple[float, float]:
    r = np.asarray(r, dtype=float)
    return float(np.max(np.abs(r))), float(math.sqrt(math.fsum(r * r) / len(r)))


@dataclass
class ResidualReport:
    series: list[dict]
    config_digest: str = ""

    def to_dict(self) -> dict:
        return {"config_digest": self.config_digest, "claim": "sin(phi)^2 / 2", "series": self.series}

    def summary(self, engine: str, mode: str = NO_MODE) -> dict:
        for s in self.series:
            if s["engine"] == engine and s["mode"] == mode:
                return s["summary"]
        raise KeyError((engine, mode))


def residuals(curve: CorrelationCurve) -> ResidualReport:
    """Per-point and summary residuals of every series against the claim and against QM."""
    keys = curve.series_keys()
    if ("qm", NO_MODE) not in keys:
        raise ConfigurationError("residuals need the qm reference series")
    if not any(engine != "qm" for engine, _ in keys):
        raise ConfigurationError("residuals need at least one model series")
    phis = curve.phis
    claim = claimed_rate(phis)
    qm_ref, _ = curve.series("qm")
    out = []
    for engine, mode in keys:
        values, errors = curve.series(engine, mode)
        r_claim = values - claim
        r_qm = values - qm_ref
        max_c, rms_c = _norms(r_claim)
        max_q, rms_q = _norms(r_qm)
        if engine == "mc":
            reproduces = bool(np.all(np.abs(r_claim) <= MC_CLAIM_Z * errors))
            rule = f"|residual| <= {MC_CLAIM_Z} std_error at every point"
        else:
            atol = QM_CLAIM_ATOL if engine == "qm" else QUAD_CLAIM_ATOL
            reproduces = max_c <= atol
            rule = f"max |residual| <= {atol}"
        out.append({
            "engine": engine,
            "mode": mode,
            "phi_rad": [float(p) for p in phis],
            "value": [float(v) for v in values],
            "claim": [float(c) for c in claim],
            "residual_claim": [float(x) for x in r_claim],
            "qm_reference": [float(x) for x in qm_ref],
            "residual_qm": [float(x) for x in r_qm],
            "summary": {
                "max_abs_claim": max_c,
                "rms_claim": rms_c,
                "max_abs_qm": max_q,
                "rms_qm": rms_q,
                "reproduces_claim": reproduces,
                "reproduces_rule": rule,
            },
        })
    return ResidualReport(out, curve.config_digest)


# --- CHSH --------------------------------------------------------------------


def model_correlation(m: Interpretation | str, q: QuadratureSpec = QuadratureSpec()) -> Callable:
    """Correlation of relative angle reduced from the model's coincidence integrals."""
    m = Interpretation.parse(m)

    def E(phi):
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        same = coincidence_integrals(phi, q, m)
        cross = coincidence_integrals(phi + math.pi / 2, q, m)
        return (same - cross) / (same + cross)

    return E


@dataclass
class ChshSummary:
    reports: list[BoundReport]
    config_digest: str = ""
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config_digest": self.config_digest,
            "reduction": CORRELATION_REDUCTION,
            "notes": self.notes,
            "reports": [r.to_dict() for r in self.reports],
        }

    def get(self, label: str) -> BoundReport:
        for r in self.reports:
            if r.label == label:
                return r
        raise KeyError(label)


def chsh_report(grid_step: float, modes: Sequence = ALL_MODES, q: QuadratureSpec = QuadratureSpec(),
                extra: dict[str, Callable] | None = None, include_qm: bool = True,
                config_digest: str = "") -> ChshSummary:
    """CHSH maxima for the QM correlation, each model mode, and any extra correlations."""
    reports = []
    if include_qm:
        reports.append(chsh_max(qm_correlation, grid_step, label="qm"))
    for m in modes:
        m = Interpretation.parse(m)
        reports.append(chsh_max(model_correlation(m, q), grid_step, label=f"model:{m.value}"))
    for label, E in (extra or {}).items():
        reports.append(chsh_max(E, grid_step, label=label))
    return ChshSummary(reports, config_digest, {"grid_step_rad": grid_step, "quadrature": q.fingerprint()})


# --- manifest & report ----------------------------------------------------------


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_text(text: str | bytes) -> str:
    data = text.encode() if isinstance(text, str) else text
    return hashlib.sha256(data).hexdigest()


def config_digest(config: dict) -> str:
    return sha256_text(canonical_json(config))


@dataclass
class RunManifest:
    config: dict
    seed: int
    created_at: str
    version: str = __version__
    digests: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.digests.setdefault("config", config_digest(self.config))

    @classmethod
    def create(cls, config: dict, seed: int, created_at: str | None = None) -> RunManifest:
        if created_at is None:
            created_at = datetime.now(timezone.utc).replace(microsecond=0).isoformat()
        return cls(config=config, seed=int(seed), created_at=created_at)

    @property
    def config_digest(self) -> str:
        return self.digests["config"]

    def verify_config(self):
        if config_digest(self.config) != self.digests.get("config"):
            raise ManifestMismatch("manifest config does not match its recorded digest")

    def to_dict(self) -> dict:
        return {"version": self.version, "config": self.config, "seed": self.seed,
                "created_at": self.created_at, "digests": dict(self.digests)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> RunManifest:
        missing = {"version", "config", "seed", "created_at", "digests"} - set(d)
        if missing:
            raise ManifestMismatch(f"manifest is missing fields {sorted(missing)}")
        return cls(config=d["config"], seed=int(d["seed"]), created_at=d["created_at"],
                   version=d["version"], digests=dict(d["digests"]))


_NUM = {"type": "number"}
_CURVE_RECORD = {
    "type": "object",
    "required": list(CSV_COLUMNS),
    "additionalProperties": False,
    "properties": {
        "phi_rad": _NUM,
        "engine": {"enum": list(ENGINES)},
        "mode": {"enum": [NO_MODE] + [m.value for m in ALL_MODES]},
        "value": _NUM,
        "std_error": {"type": "number", "minimum": 0},
    },
}
REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "eprblab run report",
    "type": "object",
    "required": ["manifest", "curves", "residuals", "chsh", "limits"],
    "additionalProperties": False,
    "properties": {
        "manifest": {
            "type": "object",
            "required": ["version", "config", "seed", "created_at", "digests"],
            "properties": {
                "version": {"type": "string"},
                "config": {"type": "object"},
                "seed": {"type": "integer", "minimum": 0},
                "created_at": {"type": "string"},
                "digests": {"type": "object", "additionalProperties": {"type": "string"}},
            },
        },
        "curves": {"type": "array", "items": _CURVE_RECORD},
        "residuals": {
            "type": "object",
            "required": ["claim", "series"],
            "properties": {
                "series": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["engine", "mode", "phi_rad", "value", "claim", "residual_claim",
                                     "residual_qm", "summary"],
                        "properties": {
                            "summary": {
                                "type": "object",
                                "required": ["max_abs_claim", "rms_claim", "max_abs_qm", "rms_qm",
                                             "reproduces_claim"],
                            },
                        },
                    },
                },
            },
        },
        "chsh": {
            "type": "object",
            "required": ["reduction", "reports"],
            "properties": {
                "reports": {
                    "type": "array",
                    "items": {"type": "object",
                              "required": ["label", "max_abs_S", "argmax", "bound_used", "violated"]},
                },
            },
        },
        "limits": {
            "type": "object",
            "required": list(REFERENCE_LIMITS),
            "additionalProperties": _NUM,
        },
    },
}


def validate_report(doc: dict) -> None:
    jsonschema.validate(doc, REPORT_SCHEMA)


def assemble_report(curve: CorrelationCurve, resid: ResidualReport, chsh: ChshSummary,
                    manifest: RunManifest) -> dict:
    """Machine-readable run report; every component must come from ``manifest``."""
    manifest.verify_config()
    expected = manifest.config_digest
    for name, digest in (("curves", curve.config_digest), ("residuals", resid.config_digest),
                         ("chsh", chsh.config_digest)):
        if digest != expected:
            raise ManifestMismatch(f"{name} was produced under config {digest[:12] or '<none>'}, "
                                   f"manifest has {expected[:12]}")
    chsh_doc = chsh.to_dict()
    chsh_doc.pop("config_digest")
    resid_doc = resid.to_dict()
    resid_doc.pop("config_digest")
    doc = {
        "manifest": manifest.to_dict(),
        "curves": [r.to_dict() for r in curve.records],
        "residuals": resid_doc,
        "chsh": chsh_doc,
        "limits": dict(REFERENCE_LIMITS),
    }
    validate_report(doc)
    return doc


def report_json(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def human_summary(doc: dict) -> str:
    """Markdown digest of a run report, claim and computation side by side."""
    m = doc["manifest"]
    lines = [
        "# EPRB run report",
        "",
        f"- tool version: {m['version']}",
        f"- created: {m['created_at']}",
        f"- seed: {m['seed']}",
        f"- config digest: `{m['digests'].get('config', '')}`",
        "",
        "## Coincidence rate vs the claimed sin(phi)^2 / 2",
        "",
        "| engine | mode | max abs residual | rms residual | max abs vs QM | reproduces claim |",
        "|---|---|---|---|---|---|",
    ]
    for s in doc["residuals"]["series"]:
        sm = s["summary"]
        lines.append(f"| {s['engine']} | {s['mode']} | {sm['max_abs_claim']:.6g} | {sm['rms_claim']:.6g} | "
                     f"{sm['max_abs_qm']:.6g} | {'yes' if sm['reproduces_claim'] else 'no'} |")
    lines += ["", "Selected points (claim / computed):", ""]
    for s in doc["residuals"]["series"]:
        if s["engine"] == "qm":
            continue
        picks = _selected_points(s["phi_rad"])
        cells = ", ".join(f"{math.degrees(s['phi_rad'][i]):.0f} deg: {s['claim'][i]:.6g} / {s['value'][i]:.6g}"
                          for i in picks)
        lines.append(f"- {s['engine']}/{s['mode']}: {cells}")
    lines += ["", "## CHSH", "", f"Reduction: {doc['chsh']['reduction']}", "",
              "| correlation | max abs S | argmax (deg) | exceeds 2 | exceeds 2sqrt2 | exceeds 4 | exceeds 8 |",
              "|---|---|---|---|---|---|---|"]
    for r in doc["chsh"]["reports"]:
        arg = ", ".join(f"{math.degrees(v):.1f}" for v in r["argmax"].values())
        ex = r["exceeds"]
        lines.append(f"| {r['label']} | {r['max_abs_S']:.6f} | {arg} | {ex['bell_cap_1']} | "
                     f"{ex['threshold_2sqrt2']} | {ex['cap_sqrt2']} | {ex['cap_2']} |")
    lines += ["", "Reference limits: " + ", ".join(f"{k} = {v!r}" for k, v in doc["limits"].items()), ""]
    return "\n".join(lines)


def _selected_points(phis: list[float]) -> list[int]:
    targets = (0.0, math.pi / 4, math.pi / 2)
    return sorted({int(np.argmin(np.abs(np.asarray(phis) - t))) for t in targets})
