"""
Command-line entry point.

Exit status: 0 on success, 1 for usage or configuration errors, 2 when the
physics is inconclusive or a calibration fit fails. Artifacts are written
only after all computation has finished.
"""

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, NoReturn, Optional, Sequence

import numpy as np

from .config import SimulationConfig, load_config
from .noise import run_calibration
from .pipeline import DjRun, run_dj, run_spectrum, run_tomography
from .pulses import dj_program, duration, load_preset, parse
from .types import (
    ComplexArray,
    Fid,
    RunManifest,
    SpinSimException,
    Spectrum,
    TomographyResult,
)

logger = logging.getLogger(__name__)

INPUT_ALIASES: Dict[str, str] = {"pure": "pure_00", "temporal": "temporal_average"}
Artifacts = Dict[str, bytes]


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _json_bytes(doc: Any) -> bytes:
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _csv_bytes(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> bytes:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buffer.getvalue().encode("utf-8")


def spectrum_csv(spec: Spectrum) -> bytes:
    rows = [
        (float(f), float(a.real), float(a.imag))
        for f, a in zip(spec.frequency_axis, spec.amplitudes)
    ]
    return _csv_bytes(("freq_hz", "real", "imag"), rows)


def fid_csv(fid: Fid) -> bytes:
    rows = [(float(t), float(s.real), float(s.imag)) for t, s in zip(fid.times, fid.samples)]
    return _csv_bytes(("t_s", "real", "imag"), rows)


def _matrix(entries: ComplexArray) -> Dict[str, List[List[float]]]:
    return {
        "real": [[float(v) for v in row] for row in np.real(entries)],
        "imag": [[float(v) for v in row] for row in np.imag(entries)],
    }


def _signed(z: complex) -> float:
    return abs(z) if z.real >= 0 else -abs(z)


def tomography_json(result: TomographyResult, oracle: str, input_mode: str) -> bytes:
    d = result.theory.dim
    return _json_bytes(
        {
            "oracle": oracle,
            "input_mode": input_mode,
            "epsilon": result.epsilon,
            "scale": result.scale,
            "pure_population": result.pure_population,
            "max_off_diagonal": result.max_off_diagonal,
            "experimental": _matrix(result.normalized),
            "theoretical": _matrix(result.theory.entries + np.eye(d) / d),
            "line_integrals": result.line_integrals,
        }
    )


def bars_csv(result: TomographyResult) -> bytes:
    d = result.theory.dim
    width = int(np.log2(d))
    theory = result.theory.entries + np.eye(d) / d
    rows = []
    for i in range(d):
        for j in range(d):
            label = f"{i:0{width}b}-{j:0{width}b}"
            rows.append((label, _signed(complex(result.normalized[i, j])), _signed(complex(theory[i, j]))))
    return _csv_bytes(("label", "experimental", "theoretical"), rows)


def verdict_doc(run: DjRun, config: SimulationConfig) -> Dict[str, Any]:
    low, high = run.lines
    return {
        "oracle": run.config.oracle,
        "verdict": run.verdict or "inconclusive",
        "matrix_verdict": run.matrix_verdict or "inconclusive",
        "expected": run.expected,
        "input_mode": run.config.input_mode,
        "detected_spin": run.spectrum.detected_spin,
        "lines": {"low": [low.real, low.imag], "high": [high.real, high.imag]},
        "noise": run.config.noise_enabled,
        "seed": run.config.noise.seed,
        "reference_hz": run.config.reference_hz,
    }


def summary_text(run: DjRun) -> bytes:
    low, high = run.lines
    system = run.config.system
    half = abs(system.j_coupling[0][1]) / 2
    lines = [
        f"oracle: {run.config.oracle} (expected {run.expected})",
        f"input: {run.config.input_mode}",
        f"noise: {'on' if run.config.noise_enabled else 'off'}",
        f"verdict: {run.verdict or 'inconclusive'}",
        f"density-matrix verdict: {run.matrix_verdict or 'inconclusive'}",
        f"detected spin: {run.spectrum.detected_spin}",
        f"low line  (-{half:g} Hz): {low.real:+.6e} {low.imag:+.6e}i",
        f"high line (+{half:g} Hz): {high.real:+.6e} {high.imag:+.6e}i",
        f"reference frequency: {run.config.reference_hz:.1f} Hz",
    ]
    return ("\n".join(lines) + "\n").encode("utf-8")


def write_artifacts(
    out_dir: Path, artifacts: Artifacts, command: str, config: SimulationConfig
) -> RunManifest:
    """Write every artifact atomically, then the manifest of their checksums."""
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        command=command,
        config_path=config.source,
        seed=config.experiment.noise.seed,
        output_dir=str(out_dir),
    )
    for name, payload in artifacts.items():
        manifest.checksums[name] = hashlib.sha256(payload).hexdigest()
    artifacts = dict(artifacts)
    artifacts["manifest.json"] = _json_bytes(manifest.to_dict())
    for name, payload in sorted(artifacts.items()):
        target = out_dir / name
        tmp = target.with_name(target.name + ".tmp")
        tmp.write_bytes(payload)
        os.replace(tmp, target)
        logger.info("wrote %s", target)
    return manifest


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _resolve(args: argparse.Namespace) -> SimulationConfig:
    config = load_config(args.config)
    changes: Dict[str, Any] = {"seed": args.seed, "noise_enabled": args.noise}
    if getattr(args, "oracle", None) is not None:
        changes["oracle"] = args.oracle
    if getattr(args, "input", None) is not None:
        changes["input_mode"] = INPUT_ALIASES.get(args.input, args.input)
    return config.with_overrides(**changes)


def cmd_run_dj(args: argparse.Namespace) -> int:
    config = _resolve(args)
    run = run_dj(config.experiment, config.readout)
    write_artifacts(
        Path(args.out),
        {
            "spectrum.csv": spectrum_csv(run.spectrum),
            "verdict.json": _json_bytes(verdict_doc(run, config)),
            "summary.txt": summary_text(run),
        },
        "run-dj",
        config,
    )
    sys.stdout.write(summary_text(run).decode("utf-8"))
    return 0 if run.verdict is not None else 2


def cmd_tomography(args: argparse.Namespace) -> int:
    config = _resolve(args)
    result = run_tomography(config.experiment, config.readout)
    experiment = config.experiment
    write_artifacts(
        Path(args.out),
        {
            "tomography.json": tomography_json(result, experiment.oracle, experiment.input_mode),
            "bars.csv": bars_csv(result),
        },
        "tomography",
        config,
    )
    print(f"epsilon: {result.epsilon:.6g}")
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    config = _resolve(args)
    report = run_calibration(config.experiment)
    system = config.system
    doc = report.to_dict()
    doc["configured"] = {
        "t1_s": dict(zip(system.spin_labels, system.t1)),
        "t2_s": dict(zip(system.spin_labels, system.t2)),
        "envelope_time_constant_s": config.experiment.noise.envelope_time_constant,
    }
    write_artifacts(Path(args.out), {"calibration.json": _json_bytes(doc)}, "calibrate", config)
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def cmd_spectrum(args: argparse.Namespace) -> int:
    config = _resolve(args)
    run = run_spectrum(config.experiment, config.readout, args.detect)
    write_artifacts(
        Path(args.out),
        {"spectrum.csv": spectrum_csv(run.spectrum), "fid.csv": fid_csv(run.fid)},
        "spectrum",
        config,
    )
    return 0


def cmd_parse(args: argparse.Namespace) -> int:
    config = _resolve(args)
    system = config.system
    if args.preset is not None:
        program = dj_program(args.preset, system=system) if args.full else load_preset(args.preset, system)
    elif args.text is not None:
        program = parse(args.text, system)
    else:
        raise SpinSimException("parse: give program text or --preset", "INVALID_CONFIG")
    program = program.with_tau(config.experiment.tau)
    doc = program.to_dict()
    doc["duration_s"] = duration(program, system, config.experiment.noise.pulse_width)
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", default=None, help="JSON config (default: $SPINSIM_CONFIG)")
    common.add_argument("--seed", type=int, default=None, help="RNG seed for noisy runs")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument(
        "--noise",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="enable relaxation and RF inhomogeneity",
    )
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = _Parser(prog="spinsim", description="Two-spin NMR Deutsch-Jozsa simulator")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run-dj", parents=[common], help="run and classify one oracle")
    run.add_argument("--oracle", required=True)
    run.add_argument("--input", default=None, help="pure, thermal, temporal or a full mode name")
    run.set_defaults(handler=cmd_run_dj)

    tomo = commands.add_parser("tomography", parents=[common], help="reconstruct the output state")
    tomo.add_argument("--oracle", required=True)
    tomo.add_argument("--input", default=None)
    tomo.set_defaults(handler=cmd_tomography)

    cal = commands.add_parser("calibrate", parents=[common], help="refit T1, T2 and the RF envelope")
    cal.set_defaults(handler=cmd_calibrate)

    spec = commands.add_parser("spectrum", parents=[common], help="write FID and spectrum data")
    spec.add_argument("--oracle", required=True)
    spec.add_argument("--input", default=None)
    spec.add_argument("--detect", default=None, help="spin to observe (default: first spin)")
    spec.set_defaults(handler=cmd_spectrum)

    prog = commands.add_parser("parse", parents=[common], help="dump a pulse program as JSON")
    prog.add_argument("text", nargs="?", default=None)
    prog.add_argument("--preset", default=None, help="f1..f4")
    prog.add_argument("--full", action="store_true", help="include preparation and un-rotation")
    prog.set_defaults(handler=cmd_parse)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    logger.info("spinsim %s", args.command)
    try:
        status: int = args.handler(args)
    except SpinSimException as e:
        print(f"spinsim: {e.code}: {e.message}", file=sys.stderr)
        return e.status
    logger.info("spinsim %s finished with status %d", args.command, status)
    return status


if __name__ == "__main__":
    raise SystemExit(main())
