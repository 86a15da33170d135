"""Command-line entry point: validate / analyze / run / compare.

Exit codes: 0 success, 1 validation failure, 2 numeric failure.  With
``--json`` exactly one JSON document goes to stdout; human-readable text
otherwise.  The ``COORDSIM_LOG`` environment variable sets the logging
level (e.g. DEBUG, INFO, WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import simharness
from .coordalg import (
    build_certificate,
    convergence_rate_bound,
    validate_gains,
)
from .errors import ConfigError, NumericError, SynthesisError

log = logging.getLogger("coordsim")


@dataclass
class CommandOutcome:
    exit_code: int
    payload: str


def _emit(outcome: CommandOutcome) -> int:
    if outcome.payload:
        print(outcome.payload)
    return outcome.exit_code


def _load(path: str, dt: float | None, seed: int | None) -> simharness.ScenarioConfig:
    cfg = simharness.load_config(path)
    if dt is not None:
        cfg.dt = dt
    if seed is not None:
        cfg.rng_seed = seed
    return cfg


def cmd_validate(config_path: str, as_json: bool) -> CommandOutcome:
    try:
        cfg = simharness.load_config(config_path)
    except ConfigError as exc:
        if as_json:
            return CommandOutcome(1, json.dumps({"ok": False, "error": str(exc)}))
        return CommandOutcome(1, f"invalid config: {exc}")
    report = simharness.validation_report(cfg)
    if as_json:
        return CommandOutcome(0 if report["ok"] else 1, json.dumps(report, indent=2))
    lines = []
    for c in report["checks"]:
        lines.append(f"[{'ok' if c['ok'] else 'FAIL'}] {c['name']}: {c['detail']}")
    lines.append("valid" if report["ok"] else "invalid")
    return CommandOutcome(0 if report["ok"] else 1, "\n".join(lines))


def cmd_analyze(config_path: str, as_json: bool) -> CommandOutcome:
    try:
        cfg = simharness.load_config(config_path)
        cfg.validate()
    except ConfigError as exc:
        return CommandOutcome(1, f"invalid config: {exc}")
    if cfg.mode != simharness.MODE_DIRECTED or cfg.n < 2:
        return CommandOutcome(
            1, "analyze requires a directed-switched scenario with n >= 2"
        )
    try:
        cert = build_certificate(cfg.topology_family, cfg.mu_list, cfg.a, cfg.b)
    except (SynthesisError, NumericError, ValueError) as exc:
        return CommandOutcome(2, f"synthesis failed: {exc}")
    gains = validate_gains(cfg.a, cfg.b, cert)
    doc = {
        "n": cert.n,
        "m": cert.m,
        "p_spectrum": sorted(np.linalg.eigvalsh(cert.p).tolist()),
        "h_spectra": [
            sorted(np.linalg.eigvalsh(h).tolist()) for h in cert.h_matrices
        ],
        "lambda_max_p": cert.lambda_max_p,
        "lambda_min_p": cert.lambda_min_p,
        "mu_admissible_interval": [0.0, 1.0 / cert.lambda_max_p],
        "mu_list": list(cert.mu_list),
        "dwell_bound": cert.dwell_bound,
        "gues_overshoot": cert.gues_overshoot,
        "max_laplacian_norm": cert.max_laplacian_norm,
        "mu_min": cert.mu_min,
        "rate_bound": convergence_rate_bound(cfg.a, cfg.b, cert),
        "gain_report": gains.to_dict(),
        "dt_check": {
            "dt": cfg.dt,
            "dwell_over_10": cert.dwell_bound / 10.0,
            "ok": cfg.dt <= cert.dwell_bound / 10.0,
        },
    }
    if as_json:
        return CommandOutcome(0, json.dumps(doc, indent=2))
    lines = [
        f"family: m={cert.m} topologies on n={cert.n} nodes",
        f"P spectrum: {['%.6g' % x for x in doc['p_spectrum']]}",
    ]
    for i, spec in enumerate(doc["h_spectra"], start=1):
        lines.append(f"H_{i} spectrum: {['%.6g' % x for x in spec]}")
    lines += [
        f"admissible mu interval: (0, {1.0 / cert.lambda_max_p:.6g})",
        f"dwell time bound: {cert.dwell_bound:.6g} s",
        f"overshoot k = {cert.gues_overshoot:.6g}, max |L_i| = {cert.max_laplacian_norm:.6g}, mu = {cert.mu_min:.6g}",
        f"convergence rate bound: {doc['rate_bound']:.6g} 1/s",
    ]
    for c in gains.checks:
        lines.append(
            f"[{'ok' if c.passed else 'FAIL'}] {c.name}: lhs={c.lhs:.6g} rhs={c.rhs:.6g}"
        )
    lines.append(
        f"[{'ok' if doc['dt_check']['ok'] else 'FAIL'}] dt {cfg.dt} <= dwell/10 "
        f"{cert.dwell_bound / 10.0:.6g}"
    )
    return CommandOutcome(0, "\n".join(lines))


def cmd_run(
    config_path: str, outdir: str, as_json: bool, dt: float | None, seed: int | None
) -> CommandOutcome:
    try:
        cfg = _load(config_path, dt, seed)
        log.info("running %s scenario, dt=%g, t_max=%g", cfg.mode, cfg.dt, cfg.t_max)
        log_ = simharness.run_scenario(cfg)
    except ConfigError as exc:
        return CommandOutcome(1, f"invalid config: {exc}")
    except SynthesisError as exc:
        return CommandOutcome(1, f"synthesis failed: {exc}")
    except NumericError as exc:
        return CommandOutcome(2, f"numeric failure: {exc}")
    log.info("run finished at t=%g with %d switches", log_.t[-1], len(log_.switch_log))
    simharness.write_outputs(log_, outdir)
    summary = simharness.summary_dict(log_)
    if log_.violations:
        first = log_.violations[0]
        msg = (
            f"feasibility violation: vehicle {first.vehicle} {first.bound} bound at "
            f"t={first.time:.6g} (value {first.value:.6g}); {len(log_.violations)} total"
        )
        if as_json:
            summary["first_violation"] = msg
            return CommandOutcome(1, json.dumps(summary, indent=2, sort_keys=True))
        return CommandOutcome(1, msg)
    if as_json:
        return CommandOutcome(0, json.dumps(summary, indent=2, sort_keys=True))
    lines = [f"{k}: {summary[k]}" for k in sorted(summary)]
    lines.append(f"outputs written to {outdir}")
    return CommandOutcome(0, "\n".join(lines))


def cmd_compare(
    directed_path: str,
    bidirectional_path: str,
    outdir: str,
    as_json: bool,
    dt: float | None,
    seed: int | None,
) -> CommandOutcome:
    try:
        cfg_d = _load(directed_path, dt, seed)
        cfg_b = _load(bidirectional_path, dt, seed)
        for name, want, got in (
            ("n", cfg_d.n, cfg_b.n),
            ("a", cfg_d.a, cfg_b.a),
            ("b", cfg_d.b, cfg_b.b),
            ("delta", cfg_d.delta, cfg_b.delta),
            ("t_f", cfg_d.t_f, cfg_b.t_f),
            ("traj_offsets", cfg_d.traj_offsets, cfg_b.traj_offsets),
            ("traj_angles", cfg_d.traj_angles, cfg_b.traj_angles),
        ):
            if want != got:
                raise ConfigError(
                    f"compare needs matched scenarios: {name} differs ({want} vs {got})"
                )
        log_d = simharness.run_scenario(cfg_d)
        log_b = simharness.run_scenario(cfg_b)
    except ConfigError as exc:
        return CommandOutcome(1, f"invalid comparison: {exc}")
    except SynthesisError as exc:
        return CommandOutcome(1, f"synthesis failed: {exc}")
    except NumericError as exc:
        return CommandOutcome(2, f"numeric failure: {exc}")
    simharness.write_outputs(log_d, os.path.join(outdir, "directed"))
    simharness.write_outputs(log_b, os.path.join(outdir, "bidirectional"))
    sum_d = simharness.summary_dict(log_d)
    sum_b = simharness.summary_dict(log_b)
    doc = {
        "directed": sum_d,
        "bidirectional": sum_b,
        "comm_ratio": (
            sum_d["comm_amount"] / sum_b["comm_amount"]
            if sum_b["comm_amount"]
            else None
        ),
    }
    with open(os.path.join(outdir, "comparison.json"), "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    if as_json:
        return CommandOutcome(0, json.dumps(doc, indent=2, sort_keys=True))
    rows = [
        ("", "directed", "bidirectional"),
        ("comm_amount", f"{sum_d['comm_amount']:.4f}", f"{sum_b['comm_amount']:.4f}"),
        ("tau_f", str(sum_d["tau_f"]), str(sum_b["tau_f"])),
        (
            "final_xi_norm",
            f"{sum_d['final_xi_norm']:.3e}",
            f"{sum_b['final_xi_norm']:.3e}",
        ),
    ]
    width = max(len(r[0]) for r in rows) + 2
    lines = [f"{r[0]:<{width}}{r[1]:>16}{r[2]:>16}" for r in rows]
    lines.append(f"outputs written to {outdir}")
    return CommandOutcome(0, "\n".join(lines))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coordsim",
        description="Multi-vehicle time coordination over switched directed topologies",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=False):
        p.add_argument("--json", action="store_true", help="emit one JSON document")
        p.add_argument("--dt", type=float, default=None, help="override step size")
        p.add_argument("--seed", type=int, default=None, help="override rng seed")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("validate", help="check a scenario config")
    p.add_argument("--config", required=True)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("analyze", help="print the switching certificate")
    p.add_argument("--config", required=True)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("--config", required=True)
    common(p, needs_out=True)

    p = sub.add_parser("compare", help="directed vs bidirectional communication cost")
    p.add_argument("directed", help="directed scenario config")
    p.add_argument("bidirectional", help="bidirectional baseline config")
    common(p, needs_out=True)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("COORDSIM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr)
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        return _emit(cmd_validate(args.config, args.json))
    if args.command == "analyze":
        return _emit(cmd_analyze(args.config, args.json))
    if args.command == "run":
        return _emit(cmd_run(args.config, args.out, args.json, args.dt, args.seed))
    if args.command == "compare":
        return _emit(
            cmd_compare(
                args.directed, args.bidirectional, args.out, args.json, args.dt, args.seed
            )
        )
    raise AssertionError("unreachable")


if __name__ == "__main__":
    raise SystemExit(main())
