"""Command-line entry point: ``cvmdi <subcommand> --config cfg.json [--out file]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiments as ex
from .errors import CvmdiError, NoKeyError, ValidationError
from .oracle import oracle_report, propagate
from .protocol import scenario_covariance
from .temporal import DetectorMode, detector_tm, load_waveform_csv, mode_match, normalize

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_VALIDATION = 2
EXIT_NO_KEY = 3


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _config(args) -> ex.ScenarioConfig:
    if args.config is None:
        return ex.ScenarioConfig()
    return ex.load_config(args.config)


def cmd_sweep_distance(args) -> int:
    cfg = _config(args)
    rows = ex.sweep_distance(cfg, finite_size=args.finite_size, workers=args.workers)
    _emit(ex.rows_to_csv_text(rows, cfg, "sweep-distance"), args.out)
    return EXIT_OK


def cmd_max_distance(args) -> int:
    cfg = _config(args)
    row = {"topology": cfg.topology, **{k: getattr(cfg.matching, k) for k in ex.MATCHING_KEYS}}
    row["L_max_km"] = ex.max_distance(cfg)
    if args.finite_size or cfg.finite_size is not None:
        try:
            row["L_max_finite_km"] = ex.max_distance(cfg, finite_size=True)
        except NoKeyError:
            row["L_max_finite_km"] = 0.0
    _emit(ex.rows_to_csv_text([row], cfg, "max-distance"), args.out)
    return EXIT_OK


def cmd_grid(args) -> int:
    cfg = _config(args)
    rows = ex.grid_sweep(cfg, args.distance, workers=args.workers)
    _emit(ex.rows_to_csv_text(rows, cfg, "grid"), args.out)
    return EXIT_OK


def cmd_excess_noise(args) -> int:
    cfg = _config(args)
    _emit(ex.rows_to_csv_text(ex.excess_noise_curve(cfg), cfg, "excess-noise"), args.out)
    return EXIT_OK


def cmd_mode_match(args) -> int:
    rows = []
    if args.signal or args.detector:
        if not (args.signal and args.detector):
            raise ValidationError("--signal and --detector must be given together")
        sig = normalize(load_waveform_csv(args.signal, carrier=args.signal_carrier))
        det = detector_tm(DetectorMode(load_waveform_csv(args.detector), args.omega_lo))
        rows.append({"coefficient": "eta_m", "value": mode_match(sig, det)})
    elif args.config:
        cfg = ex.load_config(args.config)
        rows = [{"coefficient": k, "value": getattr(cfg.matching, k)} for k in ex.MATCHING_KEYS]
    else:
        raise ValidationError("mode-match needs --signal/--detector or --config")
    _emit(ex.rows_to_csv_text(rows, None, "mode-match"), args.out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _config(args)
    sc = cfg.scenario_at(args.distance)
    gamma, _ = scenario_covariance(sc)
    est = propagate(sc, shots=args.shots, seed=args.seed, workers=args.workers)
    rep = oracle_report(gamma, est)
    header = (
        f"topology: {cfg.topology}\nL_km: {args.distance:g}\n"
        f"L_AC: {sc.channel.L_AC:g}\nL_BC: {sc.channel.L_BC:g}\n"
    )
    _emit(header + rep.to_text(), args.out)
    return EXIT_OK if rep.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cvmdi", description="CV-MDI QKD with temporal-mode mismatch")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp, finite=True, workers=True):
        sp.add_argument("--config", type=str, default=None, help="JSON scenario file")
        sp.add_argument("--out", type=str, default=None, help="output path (default: stdout)")
        if finite:
            sp.add_argument("--finite-size", action="store_true",
                            help="add finite-size columns (defaults N=1e8, m=N/2)")
        if workers:
            sp.add_argument("--workers", type=int, default=1)

    s = sub.add_parser("sweep-distance", help="key rate versus total distance")
    common(s)
    s.set_defaults(func=cmd_sweep_distance)

    s = sub.add_parser("max-distance", help="largest distance with positive key")
    common(s, workers=False)
    s.set_defaults(func=cmd_max_distance)

    s = sub.add_parser("grid", help="key rate over the (eta_A, eta_B) grid")
    common(s, finite=False)
    s.add_argument("--distance", type=float, default=None, help="fixed distance in km (default: grid.L)")
    s.set_defaults(func=cmd_grid)

    s = sub.add_parser("excess-noise", help="equivalent excess noise versus distance")
    common(s, finite=False, workers=False)
    s.set_defaults(func=cmd_excess_noise)

    s = sub.add_parser("mode-match", help="mode-matching coefficient from waveform files")
    common(s, finite=False, workers=False)
    s.add_argument("--signal", type=str, default=None, help="signal waveform CSV (t,re,im)")
    s.add_argument("--detector", type=str, default=None, help="LO envelope CSV (t,re,im)")
    s.add_argument("--omega-lo", type=float, default=0.0, help="LO carrier offset, rad/s")
    s.add_argument("--signal-carrier", type=float, default=0.0, help="signal carrier offset, rad/s")
    s.set_defaults(func=cmd_mode_match)

    s = sub.add_parser("oracle", help="Monte-Carlo check of the analytic covariance matrix")
    common(s, finite=False)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--shots", type=int, default=1_000_000)
    s.add_argument("--distance", type=float, default=10.0, help="total distance in km")
    s.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NoKeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_KEY
    except (ValidationError, CvmdiError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
