"""Command-line front end: sweeps, optimisations and simulations to CSV.

Usage::

    pinchnoma ul-ber-curve --config exp.ini --out ul.csv
    pinchnoma optimize-dl --seed 7 --threads 4

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import csv
import io
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .channel import channel_pair
from .config import ConfigError, load_config, to_dbm, to_watt
from .dl_ber import DlLinkConfig, dl_ber, dl_cost
from .optimize import DLJointOptimizer, ULPositionOptimizer
from .simulate import SimSpec, noise_self_test, simulate_dl, simulate_ul
from .ul_ber import QPSK, RESIDUALS, UlLinkConfig, ber1, ber2, q_function, residual_prob, ul_bers

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class NumericalError(RuntimeError):
    """A computation produced an unusable result."""


def _row_seed(seed, row):
    """Independent per-row simulation seed derived from the run seed."""
    ss = np.random.SeedSequence([int(seed), int(row)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _sim_spec(cfg, row):
    sim = cfg["sim"]
    return SimSpec(sim["n_symbols"], _row_seed(sim["seed"], row), sim["chunk"], sim["threads"])


def _ul_link(cfg, power):
    p = to_watt(power, cfg["ul"]["power_unit"])
    return UlLinkConfig(p, p, cfg.sigma)


def _dl_link(cfg, power, alpha=None):
    dl = cfg["dl"]
    return DlLinkConfig(
        to_watt(power, dl["power_unit"]), cfg.sigma, dl["M1"], dl["M2"],
        dl["alpha"] if alpha is None else alpha,
    )


def _ul_optimizer(cfg):
    opt = cfg["optimize"]
    return ULPositionOptimizer(
        T=opt["T"], half_width=opt["window"], n_fine=opt["N"],
        fine_step=opt["delta"], n_starts=opt["n_starts"],
    )


def _dl_optimizer(cfg, alpha=None):
    return DLJointOptimizer(
        restarts=cfg["optimize"]["restarts"], seed=cfg["sim"]["seed"], alpha=alpha
    )


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, header, rows, cfg, command):
    """Write rows atomically, preceded by ``#`` provenance comments."""
    buf = io.StringIO()
    buf.write(f"# tool: pinchnoma {__version__}\n")
    buf.write(f"# command: {command}\n")
    buf.write(f"# config_sha256: {cfg.digest()}\n")
    buf.write(f"# seed: {cfg['sim']['seed']}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _check_finite(*values):
    if not all(np.all(np.isfinite(v)) for v in values):
        raise NumericalError("non-finite result")


UL_CURVE_HEADER = [
    "power_dBm", "x", "ber1_analytic", "ber2_analytic", "ber_avg_analytic",
    "ber1_sim", "ber2_sim", "ber_avg_sim", "sim_se1", "sim_se2",
]


def cmd_ul_ber_curve(cfg):
    geom = cfg.ul_geometry()
    rows = []
    row = 0
    for power in cfg["ul"]["powers"]:
        link = _ul_link(cfg, power)
        x_opt = None
        for placement in cfg["ul"]["placements"]:
            if placement == "optimized":
                if x_opt is None:
                    x_opt = _ul_optimizer(cfg).fit(geom, link).x_star_
                x = x_opt
            else:
                x = placement
            b1, b2 = (float(b) for b in ul_bers(x, geom, link))
            h1, h2 = channel_pair(geom, x)
            sim = simulate_ul(_sim_spec(cfg, row), complex(h1), complex(h2), link)
            (s1, se1), (s2, se2) = sim.for_user(1), sim.for_user(2)
            _check_finite(b1, b2, s1, s2)
            rows.append([to_dbm(power, cfg["ul"]["power_unit"]), x, b1, b2, (b1 + b2) / 2,
                         s1, s2, (s1 + s2) / 2, se1, se2])
            row += 1
    return UL_CURVE_HEADER, rows


def cmd_ul_position_sweep(cfg):
    geom = cfg.ul_geometry()
    rows = []
    for power in cfg["ul"]["powers"]:
        est = _ul_optimizer(cfg).fit(geom, _ul_link(cfg, power))
        p_dbm = to_dbm(power, cfg["ul"]["power_unit"])
        for x, f, f_sm in zip(est.curve_.grid, est.curve_.values, est.envelope_.values):
            rows.append([p_dbm, x, f, f_sm])
    return ["power_dBm", "x", "f_dB", "f_smoothed_dB"], rows


DL_CURVE_HEADER = [
    "power_dBm", "variant", "x", "alpha", "ber1_analytic", "ber2_analytic", "ber_avg_analytic",
    "ber1_sim", "ber2_sim", "ber_avg_sim", "sim_se1", "sim_se2",
]


def dl_variants(cfg, power):
    """``(name, x, alpha)`` for the optimised, baseline and equal-power placements."""
    geom = cfg.geometry()
    link = _dl_link(cfg, power)
    dl = cfg["dl"]
    joint = _dl_optimizer(cfg).fit(geom, link)
    equal = _dl_optimizer(cfg, alpha=dl["equal_alpha"]).fit(geom, link)
    return [
        ("optimized", joint.x_star_, joint.alpha_star_),
        ("baseline", dl["baseline_x"], dl["baseline_alpha"]),
        ("equal_power", equal.x_star_, equal.alpha_star_),
    ]


def cmd_dl_ber_curve(cfg):
    geom = cfg.geometry()
    rows = []
    row = 0
    for power in cfg["dl"]["powers"]:
        for name, x, alpha in dl_variants(cfg, power):
            link = _dl_link(cfg, power, alpha)
            b1, b2 = dl_ber(1, x, geom, link), dl_ber(2, x, geom, link)
            h1, h2 = channel_pair(geom, x)
            sim = simulate_dl(_sim_spec(cfg, row), complex(h1), complex(h2), link)
            (s1, se1), (s2, se2) = sim.for_user(1), sim.for_user(2)
            _check_finite(b1, b2, s1, s2)
            rows.append([to_dbm(power, cfg["dl"]["power_unit"]), name, x, alpha, b1, b2,
                         (b1 + b2) / 2, s1, s2, (s1 + s2) / 2, se1, se2])
            row += 1
    return DL_CURVE_HEADER, rows


def cmd_dl_surface(cfg):
    geom = cfg.geometry()
    dl = cfg["dl"]
    link = _dl_link(cfg, dl["surface_power"])
    xs = np.linspace(0.0, geom.L, dl["surface_nx"])
    alphas = np.linspace(0.0, 1.0, dl["surface_nalpha"])
    X, A = np.meshgrid(xs, alphas, indexing="ij")
    cost = dl_cost(X, A, geom, link)
    if np.any(np.isnan(cost)):
        raise NumericalError("NaN in the downlink cost surface")
    rows = [[x, a, c] for x, a, c in zip(X.ravel(), A.ravel(), cost.ravel())]
    return ["x", "alpha", "cost_dB"], rows


def cmd_optimize_ul(cfg, report):
    geom = cfg.ul_geometry()
    rows = []
    for power in cfg["ul"]["powers"]:
        p_dbm = to_dbm(power, cfg["ul"]["power_unit"])
        est = _ul_optimizer(cfg).fit(geom, _ul_link(cfg, power))
        _check_finite(est.x_star_, est.cost_)
        for stage, x, f in est.result_.trace:
            rows.append([p_dbm, stage, x, f])
        report(
            f"power_dBm={p_dbm:g} x_star={est.x_star_:.6f} x_smooth={est.x_smooth_:.6f} "
            f"cost_sum_dB={est.cost_:.6f} cost_avg_dB={est.cost_ - 10 * math.log10(2):.6f}"
        )
    return ["power_dBm", "stage", "x", "cost_dB"], rows


def cmd_optimize_dl(cfg, report):
    geom = cfg.geometry()
    rows = []
    for power in cfg["dl"]["powers"]:
        p_dbm = to_dbm(power, cfg["dl"]["power_unit"])
        est = _dl_optimizer(cfg).fit(geom, _dl_link(cfg, power))
        _check_finite(est.x_star_, est.alpha_star_)
        for restart, x, a, f in est.result_.trace:
            rows.append([p_dbm, restart, x, a, f])
        report(
            f"power_dBm={p_dbm:g} x_star={est.x_star_:.6f} alpha_star={est.alpha_star_:.6f} "
            f"cost_sum_dB={est.cost_:.6f} cost_avg_dB={est.cost_ - 10 * math.log10(2):.6f}"
        )
    return ["power_dBm", "restart", "x", "alpha", "cost_dB"], rows


def cmd_simulate(cfg):
    sim = cfg["sim"]
    x = sim["x"]
    spec = _sim_spec(cfg, 0)
    if sim["scenario"] == "ul":
        geom = cfg.ul_geometry()
        link = _ul_link(cfg, sim["power"])
        unit = cfg["ul"]["power_unit"]
        analytic = [float(b) for b in ul_bers(x, geom, link)]
        alpha = ""
        h1, h2 = channel_pair(geom, x)
        result = simulate_ul(spec, complex(h1), complex(h2), link)
    else:
        geom = cfg.geometry()
        link = _dl_link(cfg, sim["power"], sim["alpha"])
        unit = cfg["dl"]["power_unit"]
        analytic = [dl_ber(1, x, geom, link), dl_ber(2, x, geom, link)]
        alpha = sim["alpha"]
        h1, h2 = channel_pair(geom, x)
        result = simulate_dl(spec, complex(h1), complex(h2), link)
    rows = []
    for i, user in enumerate(result.users):
        rows.append([sim["scenario"], to_dbm(sim["power"], unit), x, alpha, user,
                     result.errors[i], result.bits[i], result.ber[i], result.se[i], analytic[i]])
    header = ["scenario", "power_dBm", "x", "alpha", "user", "errors", "bits",
              "ber_sim", "sim_se", "ber_analytic"]
    return header, rows


def cmd_self_test(cfg, report):
    """Quick internal consistency checks; returns the list of (name, passed)."""
    rng = np.random.default_rng(cfg["sim"]["seed"])
    checks = []

    noise = noise_self_test(seed=cfg["sim"]["seed"], n=10**6)
    checks.append(("gaussian generator moments", noise["passed"]))

    worst = 0.0
    for _ in range(50):
        h1, h2 = rng.normal(size=2) + 1j * rng.normal(size=2)
        link = UlLinkConfig(1.0, rng.uniform(0.1, 1.0), rng.uniform(0.2, 2.0))
        for s2 in QPSK:
            total = sum(residual_prob(r, s2, h1, h2, link) for r in RESIDUALS)
            worst = max(worst, abs(total - 1.0))
    checks.append(("residual probabilities sum to one", worst < 1e-12))

    h1 = 0.7 * np.exp(0.3j)
    link = UlLinkConfig(2.0, 0.0, 0.5)
    expect = q_function(math.sqrt(2.0) * abs(h1) / 0.5)
    checks.append(("single-user uplink reduction", abs(ber1(h1, 0.3, link) - expect) < 1e-12))

    geom = cfg.geometry()
    link = _ul_link(cfg, 0.0)
    b2 = ber2(*channel_pair(geom, 6.0), link)
    checks.append(("uplink BER in [0, 1/2]", 0.0 <= b2 <= 0.5))

    for name, ok in checks:
        report(f"{'PASS' if ok else 'FAIL'} {name}")
    return checks


COMMANDS = (
    "ul-ber-curve", "ul-position-sweep", "dl-ber-curve", "dl-surface",
    "optimize-ul", "optimize-dl", "simulate", "self-test",
)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pinchnoma",
        description="BER analysis, simulation and PA placement for two-user pinching-antenna NOMA.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", metavar="PATH", help="INI configuration (defaults if omitted)")
    parser.add_argument("--out", metavar="PATH", help="CSV output path (overrides [output] path)")
    parser.add_argument("--seed", type=int, help="override [sim] seed")
    parser.add_argument("--threads", type=int, help="override [sim] threads")
    return parser


def _resolve(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed: must be a 64-bit unsigned integer")
        cfg = cfg.override("sim", "seed", args.seed)
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads: must be >= 1")
        cfg = cfg.override("sim", "threads", args.threads)
    if args.out is not None:
        cfg = cfg.override("output", "path", args.out)
    out_dir = os.path.dirname(os.path.abspath(cfg["output"]["path"]))
    if not os.path.isdir(out_dir):
        raise ConfigError(f"[output] path: directory {out_dir} does not exist")
    return cfg


def run(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    report = lambda line: print(line, file=stdout)
    try:
        cfg = _resolve(args)
    except ConfigError as exc:
        print(f"pinchnoma: config error: {exc}", file=stderr)
        return EXIT_CONFIG

    try:
        if args.command == "self-test":
            checks = cmd_self_test(cfg, report)
            return EXIT_OK if all(ok for _, ok in checks) else EXIT_NUMERIC
        if args.command == "optimize-ul":
            header, rows = cmd_optimize_ul(cfg, report)
        elif args.command == "optimize-dl":
            header, rows = cmd_optimize_dl(cfg, report)
        else:
            handler = {
                "ul-ber-curve": cmd_ul_ber_curve,
                "ul-position-sweep": cmd_ul_position_sweep,
                "dl-ber-curve": cmd_dl_ber_curve,
                "dl-surface": cmd_dl_surface,
                "simulate": cmd_simulate,
            }[args.command]
            header, rows = handler(cfg)
    except ConfigError as exc:
        print(f"pinchnoma: config error: {exc}", file=stderr)
        return EXIT_CONFIG
    except (NumericalError, ArithmeticError, ValueError) as exc:
        print(f"pinchnoma: numerical failure: {exc}", file=stderr)
        return EXIT_NUMERIC

    path = cfg["output"]["path"]
    write_csv(path, header, rows, cfg, args.command)
    report(f"wrote {len(rows)} rows to {path}")
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
