"""Command-line surface: emits the rate curves, p2p optimum and simulation
reports as CSV/JSON for plotting and scripted verification.

Every command is reproducible from (argv, seed) alone and embeds its fully
resolved configuration in the output.  Exit codes: 0 success, 2 usage error,
3 infeasible configuration, 4 bound violation in simulate.
"""

import argparse
import json
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import quantizer as qz
from . import rates, sim
from .errors import InfeasibleConfigError
from .field import (EXP_MARKOV, SINC, covariance_matrix, load_correlation_table,
                    make_correlation, sensor_positions)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_BOUND_VIOLATION = 4

PMAX_CSV_COLUMNS = ("N", "p_max", "p_max_over_n", "feasible")


@dataclass
class RunConfig:
    command: str
    model: str
    d_net: float
    n_list: tuple = ()
    n: int = 0
    k: int = 0
    k_max: int = 0
    p: float = 0.0
    levels: int = 0
    m: int = 20_000
    m_prime: int = 2000
    grid_g: int = 8
    seed: int = 0
    units: str = "nats"
    out: str = ""
    format: str = ""
    csv_log: str = ""
    scheme: str = ""
    naive: bool = False


def _resolve_model(spec):
    if spec == "sinc":
        return make_correlation(SINC)
    if spec == "exp":
        return make_correlation(EXP_MARKOV)
    if spec.startswith("table:"):
        return load_correlation_table(spec[len("table:"):])
    raise InfeasibleConfigError(f"unknown model spec {spec!r}")


def _unit_scale(units):
    return 1.0 if units == "nats" else 1.0 / np.log(2.0)


def _config_dict(cfg):
    # the sink path is where the bytes go, not part of what they are;
    # leaving it out keeps reruns byte-identical wherever they write
    obj = asdict(cfg)
    obj.pop("out")
    return obj


def _config_json(cfg):
    return json.dumps(_config_dict(cfg), sort_keys=True)


def _csv_payload(cfg, header, rows):
    lines = [f"# config: {_config_json(cfg)}", ",".join(header)]
    lines.extend(",".join(row) for row in rows)
    return "\n".join(lines) + "\n"


def _json_payload(cfg, body):
    body = dict(body)
    body["config"] = _config_dict(cfg)
    return json.dumps(body, indent=2, sort_keys=True) + "\n"


def cmd_pmax_curve(cfg):
    """One row per N: the largest admissible test-channel noise and its slope."""
    model = _resolve_model(cfg.model)
    rows = []
    json_rows = []
    for n in cfg.n_list:
        try:
            d_prime = rates.target_distortion_dsc(cfg.d_net, n, model)
            cov = covariance_matrix(model, sensor_positions(n))
            p_max = rates.find_pmax(cov, d_prime)
            rows.append((str(n), rates.fmt_float(p_max),
                         rates.fmt_float(p_max / n), "true"))
            json_rows.append({"N": n, "p_max": p_max, "p_max_over_n": p_max / n,
                              "feasible": True})
        except InfeasibleConfigError:
            rows.append((str(n), "nan", "nan", "false"))
            json_rows.append({"N": n, "p_max": None, "p_max_over_n": None,
                              "feasible": False})
    if cfg.format == "json":
        return _json_payload(cfg, {"rows": json_rows}), EXIT_OK
    return _csv_payload(cfg, PMAX_CSV_COLUMNS, rows), EXIT_OK


def cmd_rates(cfg):
    """Distributed vs centralized rate curve, one row per N."""
    model = _resolve_model(cfg.model)
    reports = rates.rate_curve(model, cfg.d_net, cfg.n_list)
    if cfg.format == "json":
        scale = _unit_scale(cfg.units)
        rows = []
        for r in reports:
            rows.append({
                "N": r.N, "d_prime": r.d_prime, "d_double_prime": r.d_double_prime,
                "p_max": r.p_max, "dsc_rate": r.dsc_sum_rate_nats * scale,
                "centralized_rate": r.centralized_rate_nats * scale,
                "loss_bound": r.rate_loss_bound_nats * scale,
                "theta": r.theta, "units": cfg.units, "feasible": r.feasible,
            })
        return _json_payload(cfg, {"rows": rows}), EXIT_OK
    csv_text = rates.rate_curve_csv(reports, cfg.units)
    header, *body = csv_text.strip().split("\n")
    return _csv_payload(cfg, header.split(","), [b.split(",") for b in body]), EXIT_OK


def cmd_p2p(cfg):
    """Optimal sub-interval count, its sum rate and a codebook meeting it."""
    model = _resolve_model(cfg.model)
    k_max = cfg.k_max or None
    k_star, rate_nats = qz.optimize_K(model, cfg.d_net, k_max)
    budget = qz.p2p_distortion_budget(model, cfg.d_net, k_star)
    levels = cfg.levels or qz.min_levels_for_distortion(budget)
    quant = qz.lloyd_max(levels)
    scale = _unit_scale(cfg.units)
    body = {
        "K_star": k_star,
        "sum_rate": rate_nats * scale,
        "units": cfg.units,
        "sample_budget": budget,
        "quantizer": {
            "levels": levels,
            "distortion": quant.distortion,
            "meets_budget": bool(quant.distortion <= budget),
            "delta_bits": qz.scalar_delta(levels) if levels >= 2 else None,
        },
    }
    if cfg.n:
        if cfg.n % k_star:
            body["per_sensor_rate"] = None
            body["per_sensor_rate_note"] = (
                f"K*={k_star} does not divide N={cfg.n}; schedule needs K | N"
            )
        else:
            body["per_sensor_rate"] = rate_nats * scale / cfg.n
    return _json_payload(cfg, body), EXIT_OK


def _default_p2p_k(model, d_net, n):
    """Rate-minimizing feasible K among the divisors of N."""
    best = None
    for k in range(1, n + 1):
        if n % k:
            continue
        try:
            rate = qz.p2p_rate_for_K(model, d_net, k)
        except InfeasibleConfigError:
            continue
        if best is None or rate < best[1]:
            best = (k, rate)
    if best is None:
        raise InfeasibleConfigError(
            f"no feasible sub-interval count divides N={n} for d_net={d_net}"
        )
    return best[0]


def cmd_simulate(cfg):
    """Run one seeded simulation and report the bound verdict."""
    model = _resolve_model(cfg.model)
    if cfg.scheme == "dsc":
        p = cfg.p
        if not p:
            d_prime = rates.target_distortion_dsc(cfg.d_net, cfg.n, model)
            cov = covariance_matrix(model, sensor_positions(cfg.n))
            p = rates.find_pmax(cov, d_prime)
        report = sim.simulate_dsc(model, cfg.n, p, m=cfg.m, grid_g=cfg.grid_g,
                                  seed=cfg.seed, naive=cfg.naive)
        resolved = {"p": p}
    else:
        k = cfg.k or _default_p2p_k(model, cfg.d_net, cfg.n)
        budget = qz.p2p_distortion_budget(model, cfg.d_net, k)
        levels = cfg.levels or qz.min_levels_for_distortion(budget)
        quant = qz.lloyd_max(levels)
        report = sim.simulate_p2p(model, cfg.n, k, quant, m_prime=cfg.m_prime,
                                  grid_g=cfg.grid_g, seed=cfg.seed)
        resolved = {"k": k, "levels": levels, "sample_budget": budget,
                    "designed_distortion": quant.distortion}
    if cfg.csv_log:
        sim.append_report_csv(report, cfg.csv_log)
    payload = json.loads(sim.report_to_json(report))
    payload["resolved"] = resolved
    code = EXIT_OK if report.verdict == sim.WITHIN else EXIT_BOUND_VIOLATION
    return _json_payload(cfg, payload), code


def _parse_n_list(args, parser):
    if args.n_range:
        try:
            lo, hi, step = (int(v) for v in args.n_range.split(":"))
        except ValueError:
            parser.error("--n-range must look like LO:HI:STEP")
        if step < 1 or hi < lo:
            parser.error("--n-range must satisfy LO <= HI and STEP >= 1")
        return tuple(range(lo, hi + 1, step))
    if args.n:
        try:
            values = tuple(int(v) for v in args.n.split(","))
        except ValueError:
            parser.error("--n must be a comma-separated list of integers")
        return values
    parser.error("one of --n / --n-range is required")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="densefield",
        description="Rates, distortion targets and Monte Carlo checks for "
                    "dense sampling of a 1-D Gaussian field.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt_default):
        p.add_argument("--model", required=True,
                       help="sinc | exp | table:<csv path>")
        p.add_argument("--dnet", type=float, default=0.1,
                       help="field distortion target in (0, 1)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--units", choices=("nats", "bits"), default="nats")
        p.add_argument("--out", default="", help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "json"), default=fmt_default)

    p = sub.add_parser("pmax-curve", help="largest admissible noise per N")
    common(p, "csv")
    p.add_argument("--n", default="", help="comma-separated sensor counts")
    p.add_argument("--n-range", default="", help="LO:HI:STEP sweep")

    p = sub.add_parser("rates", help="distributed vs centralized rate curve")
    common(p, "csv")
    p.add_argument("--n", default="")
    p.add_argument("--n-range", default="")

    p = sub.add_parser("p2p", help="optimize the TDMA sub-interval count")
    common(p, "json")
    p.add_argument("--k-max", type=int, default=0)
    p.add_argument("--n", type=int, default=0,
                   help="sensor count for the per-sensor rate")
    p.add_argument("--levels", type=int, default=0,
                   help="codebook size (default: smallest meeting the budget)")

    p = sub.add_parser("simulate", help="seeded Monte Carlo bound check")
    common(p, "json")
    p.add_argument("--scheme", choices=("dsc", "p2p"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--levels", type=int, default=0)
    p.add_argument("--m", type=int, default=20_000)
    p.add_argument("--m-prime", type=int, default=2000)
    p.add_argument("--grid-g", type=int, default=8)
    p.add_argument("--naive", action="store_true",
                   help="slow full-field oracle quadrature (small N only)")
    p.add_argument("--csv-log", default="",
                   help="append a one-line summary to this CSV file")
    return parser


def _config_from_args(args, parser):
    if not 0.0 < args.dnet < 1.0:
        parser.error("--dnet must lie in (0, 1)")
    cfg = RunConfig(command=args.command, model=args.model, d_net=args.dnet,
                    seed=args.seed, units=args.units, out=args.out,
                    format=args.format)
    if args.command in ("pmax-curve", "rates"):
        cfg.n_list = _parse_n_list(args, parser)
        if any(n < 1 for n in cfg.n_list):
            parser.error("sensor counts must be >= 1")
    elif args.command == "p2p":
        cfg.k_max = args.k_max
        cfg.n = args.n
        cfg.levels = args.levels
    else:
        cfg.scheme = args.scheme
        cfg.n = args.n
        cfg.k = args.k
        cfg.p = args.p
        cfg.levels = args.levels
        cfg.m = args.m
        cfg.m_prime = args.m_prime
        cfg.grid_g = args.grid_g
        cfg.naive = args.naive
        cfg.csv_log = args.csv_log
        if cfg.n < 1:
            parser.error("--n must be >= 1")
        if cfg.m < 1 or cfg.m_prime < 1:
            parser.error("--m and --m-prime must be >= 1")
        if cfg.grid_g < 2:
            parser.error("--grid-g must be >= 2")
    return cfg


_COMMANDS = {
    "pmax-curve": cmd_pmax_curve,
    "rates": cmd_rates,
    "p2p": cmd_p2p,
    "simulate": cmd_simulate,
}


def _emit(text, out_path):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = _config_from_args(args, parser)
    try:
        text, code = _COMMANDS[cfg.command](cfg)
    except InfeasibleConfigError as exc:
        print(f"infeasible configuration: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    _emit(text, cfg.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
