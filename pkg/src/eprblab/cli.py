"""Command-line driver.

Subcommands: ``qm``, ``model``, ``audit``, ``sweep``, ``report``. Angles are
given in degrees on the command line and stored in radians everywhere else.
Exit codes: 0 success, 2 usage or configuration error, 3 data-integrity error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import REFERENCE_LIMITS, STRATEGIES, audit_strategy, chsh_max
from .harness import (
    CORRELATION_REDUCTION,
    ENGINES,
    ConfigurationError,
    CorrelationCurve,
    ManifestMismatch,
    ResidualReport,
    ChshSummary,
    RunManifest,
    assemble_report,
    chsh_report,
    default_phi_grid,
    human_summary,
    report_json,
    residuals,
    sha256_text,
    sweep,
)
from .integrate import ALL_MODES, CLI_MODE_NAMES, ESTIMATOR_NOTES, Interpretation
from .plotting import plot_script, render
from .qm import qm_correlation, qm_joint_probability, state_correlation
from .quadrature import QuadratureSpec, Rule
from .sampling import McSpec

EXIT_OK, EXIT_USAGE, EXIT_INTEGRITY = 0, 2, 3
AUDIT_CHOICES = tuple(STRATEGIES) + ("qm-correlation",)
MANIFEST_NAME = "manifest.json"
RUN_FILES = {"csv": "curves.csv", "json": "curves.json"}


@dataclass
class CliConfig:
    phi_deg: float | None = None
    phi_steps: int = 181
    engines: list[str] = field(default_factory=lambda: list(ENGINES))
    modes: list[str] = field(default_factory=lambda: [m.value for m in ALL_MODES])
    quad_order: int = 64
    quad_rule: str = Rule.GAUSS_LEGENDRE.value
    samples: int = 1_000_000
    seed: int = 12345
    grid_step_deg: float = 1.0
    strategy: str = "sign-cos"
    lambda_samples: int = 100_000
    out: str | None = None
    format: str = "csv"
    workers: int = 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> CliConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> CliConfig:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    def validate(self) -> None:
        if self.format not in RUN_FILES:
            raise ConfigurationError(f"format must be csv or json, got {self.format!r}")
        if self.phi_deg is not None and not math.isfinite(self.phi_deg):
            raise ConfigurationError("phi_deg must be finite")
        for e in self.engines:
            if e not in ENGINES:
                raise ConfigurationError(f"unknown engine {e!r}")
        try:
            self.modes = [Interpretation.parse(m).value for m in self.modes]
            self.quad_spec()
            self.mc_spec()
        except (ValueError, TypeError) as exc:
            raise ConfigurationError(str(exc)) from exc
        if self.strategy not in AUDIT_CHOICES:
            raise ConfigurationError(f"unknown strategy {self.strategy!r}; available: {', '.join(AUDIT_CHOICES)}")

    def phi_grid(self) -> np.ndarray:
        if self.phi_deg is not None:
            return np.array([math.radians(self.phi_deg)])
        return default_phi_grid(self.phi_steps)

    def quad_spec(self) -> QuadratureSpec:
        return QuadratureSpec(self.quad_order, Rule(self.quad_rule))

    def mc_spec(self) -> McSpec:
        return McSpec(self.samples, self.seed)

    @property
    def grid_step(self) -> float:
        return math.radians(self.grid_step_deg)


# --- argument handling -----------------------------------------------------------


def _finite_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"angle must be finite: {text!r}")
    return value


def _u64(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _shared(p: argparse.ArgumentParser, *, grid=True, engine=False, mc=False, quad=False, step=False):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--out", help="output path (file, or directory for sweep)")
    p.add_argument("--format", choices=tuple(RUN_FILES))
    p.add_argument("--seed", type=_u64)
    if grid:
        p.add_argument("--phi-deg", type=_finite_float, dest="phi_deg")
        p.add_argument("--phi-steps", type=int, dest="phi_steps")
    if engine:
        p.add_argument("--engine", choices=("quad", "mc"))
        p.add_argument("--mode", choices=tuple(CLI_MODE_NAMES))
    if quad:
        p.add_argument("--quad-order", type=int, dest="quad_order")
    if mc:
        p.add_argument("--samples", type=int)
        p.add_argument("--workers", type=int)
    if step:
        p.add_argument("--grid-step-deg", type=_finite_float, dest="grid_step_deg")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eprblab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"eprblab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("qm", help="quantum correlation and joint probability")
    _shared(p)

    p = sub.add_parser("model", help="coincidence rate of the two-mode model")
    _shared(p, engine=True, mc=True, quad=True)

    p = sub.add_parser("audit", help="CHSH audit of a local strategy or the QM correlation")
    _shared(p, grid=False, step=True)
    p.add_argument("--strategy", choices=AUDIT_CHOICES)
    p.add_argument("--lambda-samples", type=int, dest="lambda_samples")

    p = sub.add_parser("sweep", help="full run: all engines and modes, residuals, CHSH")
    _shared(p, mc=True, quad=True, step=True)
    p.add_argument("--manifest", help="rerun exactly the configuration recorded in a manifest")

    p = sub.add_parser("report", help="assemble report, plot script and figure from a run directory")
    p.add_argument("run_dir")
    p.add_argument("--out", help="destination directory (default: the run directory)")
    p.add_argument("--no-render", action="store_true", help="write the plot script only")
    return parser


_OVERRIDABLE = ("phi_deg", "phi_steps", "quad_order", "samples", "seed", "grid_step_deg",
                "strategy", "lambda_samples", "out", "format", "workers")


def merged_config(args: argparse.Namespace) -> CliConfig:
    cfg = CliConfig.load(args.config) if getattr(args, "config", None) else CliConfig()
    for name in _OVERRIDABLE:
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "phi_deg", None) is not None and getattr(args, "phi_steps", None) is not None:
        raise ConfigurationError("--phi-deg and --phi-steps are mutually exclusive")
    if getattr(args, "phi_steps", None) is not None:
        cfg.phi_deg = None
    if getattr(args, "mode", None) is not None:
        cfg.modes = [CLI_MODE_NAMES[args.mode].value]
    if getattr(args, "engine", None) is not None:
        cfg.engines = [args.engine]
    cfg.validate()
    return cfg


def manifest_config(command: str, cfg: CliConfig) -> dict:
    return {
        "command": command,
        "settings": cfg.to_dict(),
        "notes": {"estimators": ESTIMATOR_NOTES, "correlation_reduction": CORRELATION_REDUCTION,
                  "angles": "radians in every file; degrees only on the command line"},
    }


def _write_with_manifest(path: Path, text: str, command: str, cfg: CliConfig) -> RunManifest:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    manifest = RunManifest.create(manifest_config(command, cfg), cfg.seed)
    manifest.digests[path.name] = sha256_text(text)
    path.with_name(path.name + ".manifest.json").write_text(manifest.to_json())
    return manifest


def _emit(text: str, cfg: CliConfig, command: str) -> None:
    if cfg.out:
        _write_with_manifest(Path(cfg.out), text, command, cfg)
    else:
        sys.stdout.write(text)


# --- commands ------------------------------------------------------------------


def cmd_qm(args) -> int:
    cfg = merged_config(args)
    phis = cfg.phi_grid()
    print("phi_deg,phi_rad,correlation,joint_probability,state_correlation")
    for phi in map(float, phis):
        print(f"{math.degrees(phi)!r},{phi!r},{float(qm_correlation(phi))!r},"
              f"{float(qm_joint_probability(phi))!r},{state_correlation(float(phi))!r}")
    if cfg.out:
        curve = sweep(phis, engines=["qm"])
        text = curve.to_csv() if cfg.format == "csv" else curve.to_json()
        _write_with_manifest(Path(cfg.out), text, "qm", cfg)
    return EXIT_OK


def cmd_model(args) -> int:
    if args.engine in (None, "quad") and (args.samples is not None or args.seed is not None or args.workers):
        raise ConfigurationError("--samples/--seed/--workers only apply to --engine mc")
    cfg = merged_config(args)
    if args.engine is None:
        cfg.engines = ["quad"]
    curve = sweep(cfg.phi_grid(), engines=cfg.engines, modes=cfg.modes, q=cfg.quad_spec(),
                  mc=cfg.mc_spec(), workers=cfg.workers)
    _emit(curve.to_csv() if cfg.format == "csv" else curve.to_json(), cfg, "model")
    return EXIT_OK


def cmd_audit(args) -> int:
    cfg = merged_config(args)
    if cfg.strategy == "qm-correlation":
        report = chsh_max(qm_correlation, cfg.grid_step, label="qm-correlation")
    else:
        report = audit_strategy(STRATEGIES[cfg.strategy](), cfg.grid_step, cfg.lambda_samples, seed=cfg.seed)
    doc = report.to_dict()
    doc["limits"] = dict(REFERENCE_LIMITS)
    _emit(json.dumps(doc, indent=1, sort_keys=True) + "\n", cfg, "audit")
    return EXIT_OK


def run_sweep(cfg: CliConfig, out_dir: Path, manifest: RunManifest | None = None) -> RunManifest:
    """Full pipeline into ``out_dir``: curves, residuals, CHSH and manifest."""
    if manifest is None:
        manifest = RunManifest.create(manifest_config("sweep", cfg), cfg.seed)
    digest = manifest.config_digest
    q = cfg.quad_spec()
    engines = cfg.engines if "qm" in cfg.engines else ["qm", *cfg.engines]
    curve = sweep(cfg.phi_grid(), engines=engines, modes=cfg.modes, q=q, mc=cfg.mc_spec(),
                  config_digest=digest, workers=cfg.workers)
    resid = residuals(curve)
    chsh = chsh_report(cfg.grid_step, cfg.modes, q, config_digest=digest)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {
        RUN_FILES[cfg.format]: curve.to_csv() if cfg.format == "csv" else curve.to_json(),
        "residuals.json": json.dumps(resid.to_dict(), indent=1, sort_keys=True) + "\n",
        "chsh.json": json.dumps(chsh.to_dict(), indent=1, sort_keys=True) + "\n",
    }
    for name, text in files.items():
        (out_dir / name).write_text(text)
        manifest.digests[name] = sha256_text(text)
    (out_dir / MANIFEST_NAME).write_text(manifest.to_json())
    return manifest


def cmd_sweep(args) -> int:
    if args.manifest:
        if any(getattr(args, k, None) is not None for k in _OVERRIDABLE if k != "out") or args.config:
            raise ConfigurationError("--manifest cannot be combined with configuration flags")
        try:
            recorded = RunManifest.from_dict(json.loads(Path(args.manifest).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read manifest {args.manifest}: {exc}") from exc
        recorded.verify_config()
        cfg = CliConfig.from_dict(recorded.config["settings"])
        manifest = RunManifest(config=recorded.config, seed=recorded.seed, created_at=recorded.created_at,
                               version=recorded.version, digests={"config": recorded.config_digest})
    else:
        cfg = merged_config(args)
        manifest = None
    out = Path(args.out or cfg.out or "run")
    manifest = run_sweep(cfg, out, manifest)
    print(f"wrote run to {out} (config {manifest.config_digest[:12]})")
    return EXIT_OK


def load_run(run_dir: Path) -> tuple[RunManifest, CorrelationCurve, ResidualReport, ChshSummary]:
    """Read a sweep directory, checking every file against the manifest digests."""
    path = run_dir / MANIFEST_NAME
    if not path.exists():
        raise ManifestMismatch(f"no {MANIFEST_NAME} in {run_dir}")
    try:
        manifest = RunManifest.from_dict(json.loads(path.read_text()))
    except json.JSONDecodeError as exc:
        raise ManifestMismatch(f"unreadable manifest: {exc}") from exc
    manifest.verify_config()
    texts = {}
    for name, digest in manifest.digests.items():
        if name == "config":
            continue
        f = run_dir / name
        if not f.exists():
            raise ManifestMismatch(f"component {name} listed in manifest is missing")
        texts[name] = f.read_text()
        if sha256_text(texts[name]) != digest:
            raise ManifestMismatch(f"component {name} does not match its manifest digest")
    cfg_digest = manifest.config_digest
    if "curves.csv" in texts:
        curve = CorrelationCurve.from_csv(texts["curves.csv"], cfg_digest)
    elif "curves.json" in texts:
        doc = json.loads(texts["curves.json"])
        curve = CorrelationCurve.from_records(doc["curves"], doc["config_digest"])
    else:
        raise ManifestMismatch("run has no curve file")
    for name in ("residuals.json", "chsh.json"):
        if name not in texts:
            raise ManifestMismatch(f"run has no {name}")
    rdoc = json.loads(texts["residuals.json"])
    cdoc = json.loads(texts["chsh.json"])
    resid = ResidualReport(rdoc["series"], rdoc["config_digest"])
    chsh = _ChshDoc(cdoc)
    return manifest, curve, resid, chsh


class _ChshDoc(ChshSummary):
    """A stored CHSH summary, passed through unchanged."""

    def __init__(self, doc: dict):
        super().__init__([], doc.get("config_digest", ""), doc.get("notes", {}))
        self._doc = doc

    def to_dict(self) -> dict:
        return json.loads(json.dumps(self._doc))


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    manifest, curve, resid, chsh = load_run(run_dir)
    doc = assemble_report(curve, resid, chsh, manifest)
    out = Path(args.out) if args.out else run_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report_json(doc))
    (out / "report.md").write_text(human_summary(doc))
    script = out / "plot_report.py"
    script.write_text(plot_script(doc))
    wrote = ["report.json", "report.md", "plot_report.py"]
    if not args.no_render and render(script, out / "report.png"):
        wrote.append("report.png")
    print(f"wrote {', '.join(wrote)} to {out}")
    return EXIT_OK


COMMANDS = {"qm": cmd_qm, "model": cmd_model, "audit": cmd_audit, "sweep": cmd_sweep, "report": cmd_report}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"eprblab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ManifestMismatch as exc:
        print(f"eprblab {args.command}: integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY


if __name__ == "__main__":
    sys.exit(main())
