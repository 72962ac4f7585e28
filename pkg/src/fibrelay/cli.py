"""Command-line interface.

Subcommands: lyapunov, simulate, calibrate, verify, sweep.  Exit codes:
0 success, 1 verify verdict failure, 2 usage or configuration error,
3 numerical failure (unbracketable calibration or non-convergence).
"""
from __future__ import annotations

import argparse
import io
import sys
from pathlib import Path

from . import __version__
from .calibrate import find_zero_lyapunov_gain
from .coeffs import ConstantGain
from .cocycle import run_trajectory
from .config import RunParams, parse_config
from .errors import ConfigError, UnbracketableError
from .laws import verify_capacity_law, verify_power_law
from .lyapunov import estimate_lambda
from .manifest import MANIFEST_FILENAME, RunManifest, dumps_17g

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fibrelay",
        description="Random Fibonacci relay-chain simulator: growth rates, "
                    "scaling-law checks and zero-growth gain calibration.")
    parser.add_argument("--version", action="version", version=f"fibrelay {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="config file (flat KV, JSON, or a run manifest)")
        p.add_argument("--model", help="coefficient model spec, e.g. rayleigh:mu=1.0")
        p.add_argument("--gain", type=float, help="constant amplification gain")
        p.add_argument("--gains", help="per-node gains, comma separated")
        p.add_argument("--n0", type=float, help="noise power per reception (default 1)")
        p.add_argument("--i0", type=float, help="source magnitude (default 1)")
        p.add_argument("--n", type=int, help="nodes / steps (default 10000)")
        p.add_argument("--replicas", type=int, help="independent replicas (default 32)")
        p.add_argument("--seed", help="master seed (integer, or 'auto')")
        p.add_argument("--burn-in", dest="burn_in", help="burn-in nodes or 'auto'")
        p.add_argument("--renorm-period", dest="renorm_period", type=int,
                       help="renormalize every k steps (default 1)")
        p.add_argument("--workers", type=int,
                       help="replica parallelism (default $FIBRELAY_WORKERS or 1)")
        p.add_argument("--output-dir", dest="output_dir",
                       help="write artifacts plus manifest.json here")

    p = sub.add_parser("lyapunov", help="estimate the signal growth rate")
    common(p)
    p.add_argument("--kind", choices=("growth_rate", "tail_ratio"))
    p.add_argument("--validation", action="store_const", const=True, default=None,
                   help="allow the signed validation model")

    p = sub.add_parser("simulate", help="write per-node trajectory CSVs")
    common(p)
    p.add_argument("--trajectories", type=int, help="number of trajectories (default 1)")

    p = sub.add_parser("calibrate", help="find the zero-growth gain")
    common(p)
    p.add_argument("--tol", type=float, help="growth-rate tolerance (default 1e-3)")
    p.add_argument("--g-init", dest="g_init", type=float, help="bracket start (default 1)")
    p.add_argument("--max-doublings", dest="max_doublings", type=int)

    p = sub.add_parser("verify", help="check the capacity and power scaling laws")
    common(p)
    p.add_argument("--tolerance-sigma", dest="tolerance_sigma", type=float)
    p.add_argument("--slope-tol", dest="slope_tol", type=float)

    p = sub.add_parser("sweep", help="tabulate the growth rate over a gain grid")
    common(p)
    p.add_argument("--gain-grid", dest="gain_grid", help="comma-separated gains")

    return parser


_FLAG_KEYS = {
    "model": "network.model", "gain": "network.gain", "gains": "network.gains",
    "n0": "network.n0", "i0": "network.i0", "n": "run.n",
    "replicas": "run.replicas", "seed": "run.seed", "burn_in": "run.burn_in",
    "renorm_period": "run.renorm_period", "workers": "run.workers",
    "kind": "lyapunov.kind", "validation": "lyapunov.validation",
    "trajectories": "simulate.trajectories", "tol": "calibrate.tol",
    "g_init": "calibrate.g_init", "max_doublings": "calibrate.max_doublings",
    "tolerance_sigma": "verify.tolerance_sigma", "slope_tol": "verify.slope_tol",
    "gain_grid": "sweep.gain_grid",
}


def _overrides(args: argparse.Namespace) -> dict:
    out = {}
    for attr, key in _FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            out[key] = value
    return out


def _emit(params: RunParams, output_dir, files: dict, stdout_text: str = "") -> None:
    """Print stdout text and, when requested, persist files plus a manifest."""
    if stdout_text:
        sys.stdout.write(stdout_text)
    if output_dir is None:
        return
    outdir = Path(output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (outdir / name).write_bytes(text.encode("utf-8"))
    manifest = RunManifest.build(
        tool_version=__version__,
        command=params.command,
        config_echo=params.echo(),
        master_seed=params.seed,
        output_files=sorted(files),
    )
    manifest.write(outdir / MANIFEST_FILENAME)


def _simulate_worker(payload):
    config, sid, period = payload
    return run_trajectory(config, sid, renorm_period=period).to_csv()


def cmd_lyapunov(params: RunParams, output_dir) -> int:
    est = estimate_lambda(
        params.model, params.gains, params.n, params.replicas, params.seed,
        params.kind, burn_in=params.burn_in, i0=params.i0,
        validation=params.validation, renorm_period=params.renorm_period,
        workers=params.workers)
    report = dumps_17g(est.to_report(params.model.spec_string(),
                                     params.gains.spec_string(), params.seed))
    _emit(params, output_dir, {"lyapunov.json": report}, report)
    return EXIT_OK


def cmd_simulate(params: RunParams, output_dir) -> int:
    if output_dir is None:
        raise ConfigError("simulate requires --output-dir")
    from ._parallel import map_ordered
    config = params.network_config()
    payloads = [(config, sid, params.renorm_period)
                for sid in range(params.trajectories)]
    csvs = map_ordered(_simulate_worker, payloads, params.workers)
    files = {f"trajectory_{sid:03d}.csv": text for sid, text in enumerate(csvs)}
    _emit(params, output_dir, files,
          f"wrote {len(files)} trajectory file(s) to {output_dir}\n")
    return EXIT_OK


def cmd_calibrate(params: RunParams, output_dir) -> int:
    result = find_zero_lyapunov_gain(
        params.model, params.tol, params.n, params.replicas, params.seed,
        g_init=params.g_init, burn_in=params.burn_in,
        renorm_period=params.renorm_period, workers=params.workers,
        max_doublings=params.max_doublings)
    report = dumps_17g(result.to_report(params.model.spec_string(), params.tol,
                                        params.replicas, params.seed))
    _emit(params, output_dir, {"calibration.json": report}, report)
    return EXIT_OK if result.converged else EXIT_NUMERICAL


def cmd_verify(params: RunParams, output_dir) -> int:
    config = params.network_config()
    kwargs = dict(tolerance_sigma=params.tolerance_sigma, slope_tol=params.slope_tol,
                  burn_in=params.burn_in, renorm_period=params.renorm_period,
                  workers=params.workers)
    cap = verify_capacity_law(config, params.n, params.replicas, **kwargs)
    pwr = verify_power_law(config, params.n, params.replicas, **kwargs)

    table = io.StringIO()
    table.write(f"{'law':<10}{'predicted':>14}{'measured':>14}{'std_err':>12}"
                f"{'verdict':>14}\n")
    for rep in (cap, pwr):
        table.write(f"{rep.law:<10}{rep.predicted_exponent:>14.6f}"
                    f"{rep.measured.slope:>14.6f}{rep.measured.std_err:>12.2e}"
                    f"{rep.verdict:>14}\n")

    slopes = io.StringIO()
    slopes.write("replica,capacity_slope,power_slope\n")
    for sid, (cs, ps) in enumerate(zip(cap.replica_slopes, pwr.replica_slopes)):
        slopes.write(f"{sid},{cs:.17g},{ps:.17g}\n")

    model_spec = params.model.spec_string()
    gain_spec = params.gains.spec_string()
    files = {
        "verify_capacity.json": dumps_17g(cap.to_report(model_spec, gain_spec, params.seed)),
        "verify_power.json": dumps_17g(pwr.to_report(model_spec, gain_spec, params.seed)),
        "slopes.csv": slopes.getvalue(),
    }
    _emit(params, output_dir, files, table.getvalue())
    return EXIT_OK if (cap.consistent and pwr.consistent) else EXIT_VERDICT


def cmd_sweep(params: RunParams, output_dir) -> int:
    rows = ["g,lambda_hat,std_err"]
    for g in params.gain_grid:
        gains = ConstantGain(g)
        est = estimate_lambda(params.model, gains, params.n, params.replicas,
                              params.seed, burn_in=params.burn_in, i0=params.i0,
                              renorm_period=params.renorm_period,
                              workers=params.workers)
        rows.append(f"{g:.17g},{est.lambda_hat:.17g},{est.std_err:.17g}")
    text = "\n".join(rows) + "\n"
    _emit(params, output_dir, {"sweep.csv": text}, text)
    return EXIT_OK


_HANDLERS = {
    "lyapunov": cmd_lyapunov,
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def run_command(command: str, params: RunParams, output_dir=None) -> int:
    return _HANDLERS[command](params, output_dir)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (None, 0):
            return EXIT_OK
        return EXIT_CONFIG
    try:
        params = parse_config(args.command, args.config, _overrides(args))
        return run_command(args.command, params, args.output_dir)
    except UnbracketableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:  # ConfigError and domain errors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
