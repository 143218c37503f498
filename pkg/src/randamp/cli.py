"""Command-line front end: strict JSON configs in, JSON/CSV artifacts out.

Every run writes its outputs plus a manifest of SHA-256 hashes; the manifest
lands atomically after the files it describes.  All randomness descends from
one master seed, one child stream per trial, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .boxes import NsBox, algebraic_violation_box, bell_value, mixed_with_uniform, uniform_box
from .definetti import block_sizes, definetti_check, exchangeable_mixture, log2_block_sizes
from .devices import IidDevice
from .lp import analytic_bound, certify_bound
from .protocol import (
    ProtocolParams,
    acceptance_threshold,
    azuma_rejection_bound,
    proposition_bound,
    robustness_acceptance_bound,
    robustness_threshold,
    run_protocol,
)
from .quantum import (
    NoiseSpec,
    born_box,
    build_state,
    noisy_box,
    validate_state,
    xz_bases,
)
from .sv import ConstantBias, GreedyTowardString, HonestBits, SettingSteering


class ConfigError(ValueError):
    pass


def _require(cfg: dict, field: str, path: str):
    if field not in cfg:
        raise ConfigError(f"missing field '{path}{field}'")
    return cfg[field]


def _check_keys(cfg: dict, allowed, path: str = ""):
    if not isinstance(cfg, dict):
        raise ConfigError(f"expected an object at '{path or '<root>'}'")
    for key in cfg:
        if key not in allowed:
            raise ConfigError(f"unknown field '{path}{key}'")


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")


def build_strategy(spec: dict, epsilon: float, path: str = "sv."):
    if not isinstance(spec, dict):
        raise ConfigError(f"expected an object at '{path[:-1]}'")
    name = _require(spec, "strategy", path)
    if name == "honest":
        _check_keys(spec, {"strategy"}, path)
        return HonestBits()
    if name == "greedy":
        _check_keys(spec, {"strategy", "target"}, path)
        return GreedyTowardString(spec.get("target", [0]), epsilon)
    if name == "constant":
        _check_keys(spec, {"strategy", "bias"}, path)
        return ConstantBias(spec.get("bias", epsilon))
    if name == "steer":
        _check_keys(spec, {"strategy", "setting"}, path)
        return SettingSteering(_require(spec, "setting", path), epsilon)
    raise ConfigError(f"unknown strategy '{name}' at '{path}strategy'")


def build_box(spec: dict, path: str = "device.") -> NsBox:
    _check_keys(
        spec, {"model", "state_mixing", "basis_rotation", "weight", "table"}, path
    )
    model = _require(spec, "model", path)
    if model == "quantum":
        return noisy_box(
            NoiseSpec(
                state_mixing=float(spec.get("state_mixing", 0.0)),
                basis_rotation=float(spec.get("basis_rotation", 0.0)),
            )
        )
    if model == "uniform":
        return uniform_box()
    if model == "algebraic":
        return algebraic_violation_box()
    if model == "mixed_algebraic":
        return mixed_with_uniform(algebraic_violation_box(), float(spec.get("weight", 0.0)))
    if model == "table":
        return NsBox(_require(spec, "table", path))
    raise ConfigError(f"unknown device model '{model}' at '{path}model'")


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_outputs(out_dir: str, command: str, config_path: str | None, files: dict):
    """files: name -> bytes.  Writes data files, then the manifest, each via
    temp-file rename so a crash never leaves a half-written artifact."""
    os.makedirs(out_dir, exist_ok=True)
    for name, payload in files.items():
        tmp = os.path.join(out_dir, f".{name}.tmp")
        with open(tmp, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, os.path.join(out_dir, name))
    manifest = {
        "command": command,
        "version": __version__,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "config_sha256": sha256_file(config_path) if config_path else None,
        "outputs": {
            name: sha256_file(os.path.join(out_dir, name)) for name in sorted(files)
        },
    }
    tmp = os.path.join(out_dir, ".manifest.json.tmp")
    with open(tmp, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, os.path.join(out_dir, "manifest.json"))


def verify_manifest(out_dir: str) -> bool:
    with open(os.path.join(out_dir, "manifest.json")) as fh:
        manifest = json.load(fh)
    return all(
        sha256_file(os.path.join(out_dir, name)) == digest
        for name, digest in manifest["outputs"].items()
    )


def _json_bytes(payload: dict) -> bytes:
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode()


def cmd_certify(args) -> int:
    cfg = load_config(args.config)
    _check_keys(cfg, {"deltas", "method", "tolerance"})
    deltas = _require(cfg, "deltas", "")
    if not deltas:
        raise ConfigError("field 'deltas' must list at least one value")
    method = cfg.get("method", "highs")
    if method not in ("highs", "simplex"):
        raise ConfigError(f"unknown value {method!r} for field 'method'")
    tol = float(cfg.get("tolerance", 1e-8))
    grid, passed = [], True
    for delta in deltas:
        try:
            report = certify_bound(float(delta), method=method, tol=tol)
            grid.append(report.to_json())
            passed &= report.passed
        except Exception as exc:  # solver failure is a reportable outcome
            grid.append({"delta": delta, "error": str(exc)})
            passed = False
    summary = {
        "passed": passed,
        "method": method,
        "bound_formula": "min((11 + 7 delta)/32, 1/2)",
        "grid": grid,
    }
    if args.out:
        write_outputs(args.out, "certify", args.config, {"certify.json": _json_bytes(summary)})
    for entry in grid:
        if "error" in entry:
            print(f"delta={entry['delta']}: ERROR {entry['error']}")
        else:
            print(
                f"delta={entry['delta']}: max_optimum={entry['max_optimum']:.9f} "
                f"bound={entry['bound']:.9f} {'ok' if entry['passed'] else 'VIOLATED'}"
            )
    print("certification:", "pass" if passed else "FAIL")
    return 0 if passed else 1


def _simulate_trial(payload) -> tuple:
    index, seed, params, device_spec, sv_spec = payload
    rng = np.random.default_rng(seed)
    box = build_box(device_spec)
    devices = [IidDevice(box) for _ in range(params.k)]
    strategy = build_strategy(sv_spec, params.epsilon)
    result, transcript = run_protocol(params, devices, strategy, rng)
    return (
        index,
        int(result.accepted),
        result.z_k,
        -1 if result.output_bit is None else result.output_bit,
        "|".join(str(a) for a in transcript.selection),
        "|".join(str(m) for m in transcript.m_realized),
    )


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    _check_keys(
        cfg,
        {"epsilon", "delta", "mu", "k", "n", "t", "trials", "seed", "device", "sv"},
    )
    params = ProtocolParams(
        epsilon=float(_require(cfg, "epsilon", "")),
        delta=float(_require(cfg, "delta", "")),
        mu=float(_require(cfg, "mu", "")),
        k=int(_require(cfg, "k", "")),
        n=tuple(cfg["n"]) if "n" in cfg else (1,),
        t=float(cfg.get("t", 1e6)),
    )
    device_spec = _require(cfg, "device", "")
    sv_spec = _require(cfg, "sv", "")
    build_box(device_spec)  # fail fast on bad specs
    build_strategy(sv_spec, params.epsilon)
    trials = args.trials if args.trials is not None else int(cfg.get("trials", 100))
    if trials < 1:
        raise ConfigError("field 'trials' must be positive")
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)

    children = np.random.SeedSequence(seed).spawn(trials)
    jobs = [
        (i, children[i], params, device_spec, sv_spec) for i in range(trials)
    ]
    if args.jobs and args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = sorted(pool.map(_simulate_trial, jobs, chunksize=16))
    else:
        rows = [_simulate_trial(job) for job in jobs]

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["trial", "accepted", "z_k", "output_bit", "selection", "m_realized"])
    for index, accepted, z_k, bit, sel, m in rows:
        writer.writerow([index, accepted, f"{z_k:.12g}", bit, sel, m])

    n_acc = sum(r[1] for r in rows)
    zeros = sum(1 for r in rows if r[3] == 0)
    summary = {
        "params": {
            "epsilon": params.epsilon,
            "delta": params.delta,
            "mu": params.mu,
            "k": params.k,
            "n": list(params.n),
            "t": params.t,
        },
        "seed": seed,
        "trials": trials,
        "acceptance_rate": n_acc / trials,
        "output_zero_fraction": zeros / n_acc if n_acc else None,
        "threshold": acceptance_threshold(params),
        "bounds": {
            "azuma_rejection": azuma_rejection_bound(params),
            "robustness_acceptance": robustness_acceptance_bound(params),
            "proposition_total": proposition_bound(params).total,
        },
    }
    write_outputs(
        args.out,
        "simulate",
        args.config,
        {"summary.json": _json_bytes(summary), "trials.csv": buf.getvalue().encode()},
    )
    print(
        f"simulate: {trials} trials, acceptance {summary['acceptance_rate']:.4f}, "
        f"outputs in {args.out}"
    )
    return 0


def cmd_definetti(args) -> int:
    cfg = load_config(args.config)
    _check_keys(
        cfg, {"epsilon", "n", "schedule", "t_levels", "system", "sv", "pinsker", "sigma_size"}
    )
    epsilon = float(_require(cfg, "epsilon", ""))
    if "n" in cfg:
        n = [int(v) for v in cfg["n"]]
    elif "schedule" in cfg:
        sched = cfg["schedule"]
        _check_keys(sched, {"k", "t", "k_exponent"}, "schedule.")
        n = block_sizes(
            epsilon,
            int(_require(sched, "k", "schedule.")),
            float(_require(sched, "t", "schedule.")),
            int(sched.get("k_exponent", 2)),
        )
    else:
        raise ConfigError("missing field 'n' (or 'schedule')")
    t_levels = [float(v) for v in _require(cfg, "t_levels", "")]
    system_spec = _require(cfg, "system", "")
    _check_keys(system_spec, {"type", "components", "weights"}, "system.")
    if _require(system_spec, "type", "system.") != "exchangeable":
        raise ConfigError("only system.type 'exchangeable' is supported")
    components = [np.asarray(c, dtype=float) for c in _require(system_spec, "components", "system.")]
    weights = _require(system_spec, "weights", "system.")
    system = exchangeable_mixture(n, components, weights)
    strategy = build_strategy(_require(cfg, "sv", ""), epsilon)
    report = definetti_check(
        system,
        strategy,
        epsilon,
        t_levels,
        sigma_size=cfg.get("sigma_size"),
        pinsker=bool(cfg.get("pinsker", False)),
    )
    payload = report.to_json()
    if args.out:
        write_outputs(args.out, "definetti", args.config, {"definetti.json": _json_bytes(payload)})
    print(
        f"definetti: n={n} max T={report.max_t:.6f} threshold={report.threshold:.6f} "
        f"exceed fraction={report.weighted_exceed_fraction:.6f} "
        f"<= bound {report.probability_bound:.6f}"
    )
    return 0


def cmd_quantum_check(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    _check_keys(cfg, {"state_mixing", "basis_rotation"})
    noise = NoiseSpec(
        state_mixing=float(cfg.get("state_mixing", 0.0)),
        basis_rotation=float(cfg.get("basis_rotation", 0.0)),
    )
    state = build_state()
    validate_state(state)
    clean = born_box(state, xz_bases())
    box = noisy_box(noise)
    payload = {
        "state_norm": float(np.linalg.norm(state)),
        "amplitudes_pm_quarter": bool(np.allclose(np.abs(state), 0.25, atol=1e-12)),
        "noise": {"state_mixing": noise.state_mixing, "basis_rotation": noise.basis_rotation},
        "bell_value_clean": bell_value(clean),
        "bell_value_noisy": bell_value(box),
        "no_signaling": True,  # NsBox construction already enforced it
    }
    if args.out:
        write_outputs(
            args.out, "quantum-check", args.config, {"quantum_check.json": _json_bytes(payload)}
        )
    print(
        f"quantum-check: norm={payload['state_norm']:.12f} "
        f"bell_clean={payload['bell_value_clean']:.3e} "
        f"bell_noisy={payload['bell_value_noisy']:.6f}"
    )
    return 0


def _sci_from_log2(log2_value: float) -> str:
    if log2_value < 62:
        return f"{2.0 ** log2_value:.6g}"
    log10 = log2_value * math.log10(2.0)
    exponent = int(log10)
    mantissa = 10.0 ** (log10 - exponent)
    return f"{mantissa:.4f}e+{exponent}"


def cmd_bounds(args) -> int:
    cfg = load_config(args.config)
    _check_keys(cfg, {"epsilon", "delta", "mu", "k", "t", "k_exponent"})
    params = ProtocolParams(
        epsilon=float(_require(cfg, "epsilon", "")),
        delta=float(_require(cfg, "delta", "")),
        mu=float(_require(cfg, "mu", "")),
        k=int(_require(cfg, "k", "")),
        t=float(cfg.get("t", 1e6)),
    )
    k_exp = int(cfg.get("k_exponent", 2))
    prop = proposition_bound(params)
    lines = [
        f"epsilon={params.epsilon} delta={params.delta} mu={params.mu} "
        f"k={params.k} t={params.t:g}",
        f"acceptance threshold        {acceptance_threshold(params):.9g}",
        f"rejection bound (not good)  {azuma_rejection_bound(params):.9g}",
        f"robustness threshold        {robustness_threshold(params.epsilon, params.mu, params.delta):.9g}",
        f"robust acceptance bound     {robustness_acceptance_bound(params):.9g}",
        f"distance bound total        {prop.total:.9g}",
        f"  estimation term           {prop.estimation_term:.9g}",
        f"  concentration term        {prop.azuma_term:.9g}",
        f"  product-form term         {prop.definetti_term:.9g}",
        f"LP guessing bound at delta  {analytic_bound(params.delta):.9g}",
        "block schedule:",
    ]
    logs = log2_block_sizes(params.epsilon, params.k, params.t, k_exp)
    try:
        sizes = block_sizes(params.epsilon, params.k, params.t, k_exp)
        for i, (size, lg) in enumerate(zip(sizes, logs), start=1):
            lines.append(f"  n_{i} = {size}")
    except OverflowError:
        for i, lg in enumerate(logs, start=1):
            lines.append(f"  n_{i} ~ {_sci_from_log2(lg)}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        write_outputs(args.out, "bounds", args.config, {"bounds.txt": text.encode()})
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randamp",
        description="Bell-inequality randomness amplification: certification and simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "certify": (cmd_certify, "LP guessing-probability certification over a delta grid"),
        "simulate": (cmd_simulate, "Monte Carlo protocol runs to JSON + CSV"),
        "definetti": (cmd_definetti, "exact product-closeness checks on small systems"),
        "quantum-check": (cmd_quantum_check, "state and measurement-box validation"),
        "bounds": (cmd_bounds, "print every theoretical bound for given parameters"),
    }
    for name, (func, help_text) in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=(name != "quantum-check"), help="JSON config path")
        p.add_argument("--out", required=(name == "simulate"), help="output directory")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--trials", type=int, help="trial count override")
        p.add_argument("--jobs", type=int, help="worker processes for trials")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
