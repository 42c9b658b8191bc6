"""Configuration-driven experiment runner.

Usage:
    nadqec run <spec.json>    run one experiment from a JSON spec
    nadqec list [--json]      catalog of experiment kinds
    nadqec check              oracle/invariant suite (exit 3 on failure)

A spec file holds {"kind": ..., "seed": ..., "output": ..., "params":
{...}}. Every run writes a CSV (10 significant digits, deterministic row
order) plus a JSON manifest echoing the config, seeds, package version and
wall time. Exit codes: 0 success, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import __version__, code3, metrics, protocol, synth
from .noise import NoiseParams

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

THREADS_ENV = "NADQEC_THREADS"


def _worker_count() -> int:
    import os

    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}")


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    params: Mapping
    output: str
    seed: int = 0

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentSpec":
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"spec file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})")
        for req in ("kind", "output"):
            if req not in raw:
                raise ConfigError(f"{path}: missing required field '{req}'")
        kind = raw["kind"]
        if kind not in CATALOG:
            raise ConfigError(
                f"{path}: unknown kind '{kind}'; known: {', '.join(sorted(CATALOG))}")
        params = raw.get("params", {})
        missing = [f for f in CATALOG[kind].required if f not in params]
        if missing:
            raise ConfigError(
                f"{path}: kind '{kind}' missing parameter field(s): "
                + ", ".join(missing))
        return cls(kind=kind, params=params, output=raw["output"],
                   seed=int(raw.get("seed", 0)))


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _write_manifest(spec: ExperimentSpec, out_csv: Path, t0: float,
                    extra: Optional[Mapping] = None) -> None:
    manifest = {
        "kind": spec.kind,
        "params": dict(spec.params),
        "seed": spec.seed,
        "output": str(out_csv),
        "rng": metrics.RNG_KIND,
        "version": __version__,
        "wall_time_s": round(time.time() - t0, 3),
    }
    if extra:
        manifest.update(extra)
    Path(str(out_csv) + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _noise_from(params: Mapping) -> NoiseParams:
    if "t1" not in params:
        raise ConfigError("missing field 't1' in params")
    t1 = params["t1"]
    if "t2" in params:
        return NoiseParams.from_t1_t2(t1, params["t2"],
                                      readout_error=params.get("e_meas", 0.0))
    return NoiseParams(t1=t1, tphi=params.get("tphi", math.inf),
                       readout_error=params.get("e_meas", 0.0))


# ---------------------------------------------------------------------------
# Experiment implementations
# ---------------------------------------------------------------------------


def _run_multiqec(spec: ExperimentSpec, out: Path) -> None:
    p = spec.params
    noise = _noise_from(p)
    cfg = protocol.ProtocolConfig(
        logical=code3.LogicalStateSpec(p["theta"], p.get("phi", 0.0)),
        max_delay=p["max_delay"],
        total_free=tuple(p["total_free"]),
        recovery_variant=p.get("recovery", "ideal"),
    )
    pts = protocol.run_multiqec(cfg, noise)
    _write_csv(out,
               ["total_evolution_us", "fidelity", "success_probability",
                "rounds", "variant", "chadd"],
               [(x.total_evolution_us, x.fidelity, x.success_probability,
                 x.rounds, x.variant, x.chadd) for x in pts])


def _run_multiqec_chadd(spec: ExperimentSpec, out: Path) -> None:
    p = spec.params
    noise = _noise_from(p)
    layout = protocol.SpectatorLayout(
        spectators=p.get("spectators", 1),
        couplings=tuple(tuple(c) for c in p.get(
            "couplings", [[0, 3, 0.05]])),
    )
    rows = []
    for chadd in (False, True):
        cfg = protocol.ProtocolConfig(
            logical=code3.LogicalStateSpec(p["theta"], p.get("phi", 0.0)),
            max_delay=p["max_delay"],
            total_free=tuple(p["total_free"]),
            recovery_variant=p.get("recovery", "ideal"),
            chadd_enabled=chadd,
        )
        pts = protocol.run_multiqec_with_chadd(
            cfg, noise, layout,
            steps_per_interval=p.get("steps_per_interval", 60))
        rows += [(x.total_evolution_us, x.fidelity, x.success_probability,
                  x.rounds, x.variant, x.chadd) for x in pts]
    _write_csv(out,
               ["total_evolution_us", "fidelity", "success_probability",
                "rounds", "variant", "chadd"], rows)


def _run_delay_sweep(spec: ExperimentSpec, out: Path) -> None:
    p = spec.params
    noise = _noise_from(p)
    rows = []
    for max_delay in p["delays"]:
        cfg = protocol.ProtocolConfig(
            logical=code3.LogicalStateSpec(p.get("theta", math.pi)),
            max_delay=max_delay,
            total_free=tuple(p["total_free"]),
            recovery_variant=p.get("recovery", "ideal"),
        )
        for x in protocol.run_multiqec(cfg, noise):
            rows.append((max_delay, x.total_free_us, x.total_evolution_us,
                         x.fidelity, x.success_probability, x.rounds))
    _write_csv(out,
               ["max_delay_us", "total_free_us", "total_evolution_us",
                "fidelity", "success_probability", "rounds"], rows)


def _run_crosstalk_toy(spec: ExperimentSpec, out: Path) -> None:
    p = spec.params
    model = protocol.CrosstalkModel(
        omega1=p.get("omega1", 0.3), omega2=p.get("omega2", 0.2),
        g=p.get("g", 0.05), t1=p["t1"], tphi=p.get("tphi", math.inf),
        steps_per_interval=p.get("steps_per_interval", 200))
    t_final = p.get("t_final", 60.0)
    cycles = p.get("cycles", 4)
    rows = []
    for probe in ("0", "1"):
        seq = protocol.chadd_sequence(2, t_final / (8 * cycles))
        for label, chadd in (("free", None), ("chadd", seq)):
            series = protocol.run_crosstalk_toy(model, probe, chadd, t_final)
            for t, p0, p1, f in zip(series.times, series.pop0, series.pop1,
                                    series.fidelity):
                rows.append((probe, label, t, p0, p1, f))
    _write_csv(out, ["probe", "sequence", "time_us", "pop0", "pop1", "fidelity"],
               rows)


def _run_gain_surface(spec: ExperimentSpec, out: Path) -> None:
    p = spec.params
    cells = metrics.gain_surface(p["t1_range"], p["emeas_range"],
                                 p["delay_range"], theta=p.get("theta", math.pi),
                                 workers=_worker_count())
    rows = [(c.t1_us, c.e_meas, c.delay_us, c.gain, c.f_qec, c.f_bare,
             c.p_success, spec.seed) for c in cells]
    _write_csv(out, ["T1_us", "E_meas", "delay_us", "gain", "F_qec", "F_bare",
                     "p_success", "seed"], rows)
    # soft monotonicity report: gain should not grow with E_meas
    violations = []
    nd = len(p["delay_range"])
    ne = len(p["emeas_range"])
    for i, t1 in enumerate(p["t1_range"]):
        for k in range(nd):
            col = [cells[i * ne * nd + j * nd + k].gain for j in range(ne)]
            for j in range(1, len(col)):
                if col[j] > col[j - 1] + 1e-12:
                    violations.append((t1, p["emeas_range"][j],
                                       p["delay_range"][k]))
    if violations:
        print(f"gain not monotone in E_meas at {len(violations)} cell(s): "
              f"{violations[:5]}")


def _run_synth(spec: ExperimentSpec, out: Path) -> None:
    p = spec.params
    seed = spec.seed
    enc_circ, enc_res = synth.synthesize_encoder(
        seed=seed, restarts=p.get("restarts", 20))
    u_circ, u_res = synth.synthesize_recovery_u(
        seed=seed + 1, restarts=p.get("restarts", 20))
    rec_circ = synth.build_recovery_circuit(u_circ, 0.0, "approx")
    report = synth.verify_recovery_circuit(rec_circ, code3.RecoveryMap.approximate())
    d_circ = synth.block_encode_diagonal(0.0, "approx")
    d_block = d_circ.unitary()[0::2][:, 0::2]
    d_target = synth.canonical_recovery_split(0.0).d
    d_dev = float(np.max(np.abs(d_block - d_target)))
    rows = [
        ("encoder", enc_res.cost, enc_circ.count("CZ"), enc_res.restarts_used),
        ("recovery_u", u_res.cost, u_circ.count("CZ"), u_res.restarts_used),
        ("recovery_full", report.max_deviation, report.cz_count, 0),
        ("d_block_approx", d_dev, d_circ.count("CZ"), 0),
    ]
    _write_csv(out, ["component", "cost_or_deviation", "cz_count", "restarts"],
               rows)
    base = Path(str(out).removesuffix(".csv") if str(out).endswith(".csv")
                else str(out))
    Path(f"{base}.encoder.txt").write_text(enc_circ.serialize())
    Path(f"{base}.recovery.txt").write_text(rec_circ.serialize())
    Path(f"{base}.encoder.angles.txt").write_text(enc_circ.describe())
    if not (enc_res.converged and u_res.converged and report.passed):
        raise RuntimeError("synthesis failed to converge; see the CSV report")


def _run_oracle_check(spec: ExperimentSpec, out: Path) -> None:
    p = spec.params
    thetas = np.linspace(0.0, math.pi, p.get("theta_points", 10))
    gammas = np.linspace(0.0, 0.3, p.get("gamma_points", 10))
    dev_f = dev_p_app = dev_p_main = 0.0
    rows = []
    for theta in thetas:
        for g in gammas:
            outcome = code3.qec_cycle(
                code3.encode_ideal(code3.LogicalStateSpec(theta)), g, 0.0,
                code3.RecoveryMap.ideal(g))
            df = abs(outcome.fidelity - code3.oracle_fidelity_ad(theta, g))
            dpa = abs(outcome.success_probability
                      - code3.oracle_success_probability(theta, g, 0.0))
            dpm = abs(outcome.success_probability
                      - code3.success_probability_minus_form(theta, g))
            dev_f, dev_p_app = max(dev_f, df), max(dev_p_app, dpa)
            dev_p_main = max(dev_p_main, dpm)
            rows.append((theta, g, outcome.fidelity, outcome.success_probability,
                         df, dpa))
    _write_csv(out, ["theta", "gamma", "fidelity", "p_success",
                     "fidelity_deviation", "p_success_deviation"], rows)
    matched = code3.match_success_form()
    print(f"max |F_sim - F_closed_form| = {dev_f:.3e}")
    print(f"max |p_sim - p_plus_form| = {dev_p_app:.3e}")
    print(f"max |p_sim - p_minus_form| = {dev_p_main:.3e}")
    print(f"success-probability form matched: {matched}")
    if dev_f > 1e-10 or dev_p_app > 1e-10:
        raise RuntimeError("oracle deviation above 1e-10")


@dataclass(frozen=True)
class ExperimentKind:
    runner: Callable[[ExperimentSpec, Path], None]
    required: tuple[str, ...]
    figure: str
    description: str


CATALOG: dict[str, ExperimentKind] = {
    "multiqec": ExperimentKind(
        _run_multiqec, ("theta", "max_delay", "total_free", "t1"),
        "fig1b/fig3", "multi-round logical fidelity and success probability"),
    "multiqec-chadd": ExperimentKind(
        _run_multiqec_chadd, ("theta", "max_delay", "total_free", "t1"),
        "fig3d-f", "multi-round QEC with CHaDD-interleaved delays vs plain"),
    "delay-sweep": ExperimentKind(
        _run_delay_sweep, ("delays", "total_free", "t1"),
        "fig8", "fidelity/success curves for several maximum delays"),
    "crosstalk-toy": ExperimentKind(
        _run_crosstalk_toy, ("t1",),
        "fig4a", "two-qubit ZZ toy model, probe populations with/without CHaDD"),
    "gain-surface": ExperimentKind(
        _run_gain_surface, ("t1_range", "emeas_range", "delay_range"),
        "fig6", "gain over (T1, E_meas, delay) with T2 = 2 T1"),
    "synth": ExperimentKind(
        _run_synth, (),
        "fig2b", "synthesize encoder + recovery circuits and verify them"),
    "oracle-check": ExperimentKind(
        _run_oracle_check, (),
        "fig1b", "closed-form oracles vs simulation on a (theta, gamma) grid"),
}


def run(spec: ExperimentSpec) -> int:
    t0 = time.time()
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        CATALOG[spec.kind].runner(spec, out)
    except ConfigError:
        raise
    except (RuntimeError, ValueError, FloatingPointError) as exc:
        print(f"numerical failure in '{spec.kind}': {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _write_manifest(spec, out, t0)
    return EXIT_OK


def list_experiments(as_json: bool = False) -> str:
    if as_json:
        return json.dumps(
            {k: {"required": v.required, "figure": v.figure,
                 "description": v.description} for k, v in CATALOG.items()},
            indent=2, sort_keys=True)
    lines = []
    for kind in sorted(CATALOG):
        v = CATALOG[kind]
        req = ", ".join(v.required) if v.required else "(none)"
        lines.append(f"{kind:16s} figure {v.figure:10s} required: {req}")
        lines.append(f"{'':16s} {v.description}")
    return "\n".join(lines)


def check() -> int:
    """Fast oracle/invariant sweep; exit 3 on any deviation."""
    spec = ExperimentSpec(kind="oracle-check", params={},
                          output="oracle_check.csv", seed=0)
    return run(spec)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="nadqec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment from a JSON spec")
    p_run.add_argument("spec", help="path to the spec JSON file")
    p_list = sub.add_parser("list", help="list experiment kinds")
    p_list.add_argument("--json", action="store_true", dest="as_json")
    sub.add_parser("check", help="run the oracle/invariant suite")
    args = parser.parse_args(argv)

    if args.command == "list":
        print(list_experiments(args.as_json))
        return EXIT_OK
    if args.command == "check":
        return check()
    try:
        spec = ExperimentSpec.load(args.spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
