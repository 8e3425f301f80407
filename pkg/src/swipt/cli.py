"""Batch front end: run region traces, simulations and duality checks from a
JSON experiment description, writing CSV plot data.

Units at this boundary follow the usual presentation convention: rates in
kbit/s, powers in watts, deficits and receiver-side consumption in
microwatts.  Everything is converted on load; the math core stays in nats
per channel use and unit-slot watts.

Exit codes: 0 ok, 64 usage/config error, 65 infeasible operating point,
70 solver non-convergence, 74 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, InfeasibleError, InvalidParameterError
from .fading import JointFadingDistribution, MarginalFading, discretize_exponential, joint_product
from .mac import MacConfig, duality_containment, mac_trace
from .simulate import HarvestProcessSpec, SimConfig, simulate
from .solver import SolverOptions, solve_boundary, fixed_point_fractions, trace_region
from .system import SystemConfig
from .units import kbps_to_nats, microwatt_to_watt

EXIT_OK = 0
EXIT_USAGE = 64
EXIT_INFEASIBLE = 65
EXIT_NO_CONVERGE = 70
EXIT_IO = 74


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def _system_from_dict(d: dict) -> SystemConfig:
    try:
        noise = np.asarray(d["noise_vars"], dtype=float)
        rates = np.array([kbps_to_nats(v) for v in d["min_rates_kbps"]])
        if "deficits_uW" in d:
            deficits = np.array([microwatt_to_watt(v) for v in d["deficits_uW"]])
        else:
            cons = np.array([microwatt_to_watt(v) for v in d["rx_consumption_uW"]])
            amb = np.array([microwatt_to_watt(v) for v in d["rx_ambient_uW"]])
            deficits = np.maximum(cons - amb, 0.0)
        ambient = None
        consumption = None
        if "rx_ambient_uW" in d:
            ambient = np.array([microwatt_to_watt(v) for v in d["rx_ambient_uW"]])
        if "rx_consumption_uW" in d:
            consumption = np.array([microwatt_to_watt(v) for v in d["rx_consumption_uW"]])
        return SystemConfig(
            num_users=len(noise),
            noise_vars=noise,
            min_rates=rates,
            deficits=deficits,
            efficiency=float(d["efficiency"]),
            tx_budget=float(d["tx_budget_W"]),
            architectures=tuple(d["architectures"]),
            rx_ambient_mean=ambient,
            rx_consumption_mean=consumption,
        )
    except (KeyError, TypeError, InvalidParameterError) as exc:
        raise ConfigError(f"bad system block: {exc}") from exc


def _fading_from_dict(d: dict) -> JointFadingDistribution:
    try:
        kind = d.get("kind", "discretized-exponential")
        if kind == "discretized-exponential":
            means = d["mean_gains"]
            coh = d.get("coherence_slots", [1] * len(means))
            marginals = [
                discretize_exponential(m, float(d.get("step", 0.1)),
                                       float(d.get("cap", 10.0)),
                                       user=i, coherence_slots=int(coh[i]))
                for i, m in enumerate(means)
            ]
            return joint_product(marginals)
        if kind == "explicit":
            marginals = [MarginalFading.from_dict(m) for m in d["marginals"]]
            return joint_product(marginals)
        raise ConfigError(f"unknown fading kind: {kind!r}")
    except (KeyError, TypeError, InvalidParameterError) as exc:
        raise ConfigError(f"bad fading block: {exc}") from exc


def _process_from_dict(d: dict, scale: float = 1.0) -> HarvestProcessSpec:
    return HarvestProcessSpec(kind=d.get("kind", "constant"),
                              mean=float(d["mean"]) * scale,
                              floor=float(d.get("floor", 0.1 * float(d["mean"]))) * scale)


def _sim_from_dict(d: dict, system: SystemConfig, seed_override=None) -> SimConfig:
    try:
        L = system.num_users
        tx = d.get("tx_harvest", {"kind": "constant", "mean": system.tx_budget,
                                  "floor": 0.1 * system.tx_budget})
        tx_spec = _process_from_dict(tx)
        uw = microwatt_to_watt(1.0)
        if "rx_harvest_uW" in d:
            rx_h = tuple(_process_from_dict(x, uw) for x in d["rx_harvest_uW"])
        else:
            amb = system.rx_ambient_mean
            if amb is None:
                amb = np.maximum(system.deficits, 1e-9)
            rx_h = tuple(HarvestProcessSpec("constant", max(a, 1e-12), max(a, 1e-12) / 2)
                         for a in amb)
        if "rx_consumption_uW" in d:
            rx_c = tuple(_process_from_dict(x, uw) for x in d["rx_consumption_uW"])
        else:
            cons = system.rx_consumption_mean
            if cons is None:
                cons = system.deficits + np.array([h.mean for h in rx_h])
            rx_c = tuple(HarvestProcessSpec("constant", max(c, 1e-12), max(c, 1e-12) / 2)
                         for c in cons)
        eps_frac = float(d.get("epsilon_fraction", 0.01))
        return SimConfig(
            horizon=int(d.get("horizon", 10**6)),
            seed=int(seed_override if seed_override is not None else d.get("seed", 0)),
            tx_harvest=tx_spec,
            rx_harvest=rx_h,
            rx_consumption=rx_c,
            epsilon=eps_frac * tx_spec.mean,
        )
    except (KeyError, TypeError, InvalidParameterError) as exc:
        raise ConfigError(f"bad sim block: {exc}") from exc


def _mac_from_dict(d: dict) -> MacConfig:
    try:
        return MacConfig(
            budgets=np.asarray(d["budgets_W"], dtype=float),
            noise_var=float(d["noise_var"]),
            min_rates=np.array([kbps_to_nats(v) for v in d["min_rates_kbps"]]),
            deficit=microwatt_to_watt(float(d["deficit_uW"])),
            efficiency=float(d["efficiency"]),
        )
    except (KeyError, TypeError, InvalidParameterError) as exc:
        raise ConfigError(f"bad mac block: {exc}") from exc


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc


def _write_json(path: Path, obj) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_failures(out: Path, name: str, trace) -> None:
    if trace.failures:
        _write_json(out / f"{name}_failures.json", trace.failures)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_region(cfg: dict, out: Path, points, quiet: bool) -> int:
    system = _system_from_dict(cfg["system"])
    dist = _fading_from_dict(cfg["fading"])
    n = points or int(cfg.get("solver", {}).get("num_points", 33))
    trace = trace_region(system, dist, n)
    trace.to_csv(out / "trace.csv")
    _write_failures(out, "trace", trace)
    _write_json(out / "resolved_config.json", {
        "system": system.to_dict(),
        "num_points": n,
        "num_states": dist.num_states,
    })
    if not quiet:
        print(f"wrote {out / 'trace.csv'} ({len(trace.points)} points, "
              f"{len(trace.failures)} failed directions)")
    if not trace.points:
        raise ConvergenceError("no boundary point could be computed", trace.failures)
    return EXIT_OK


def _cmd_simulate(cfg: dict, out: Path, points, seed, quiet: bool) -> int:
    system = _system_from_dict(cfg["system"])
    dist = _fading_from_dict(cfg["fading"])
    weights = np.asarray(cfg.get("weights", [1.0] * system.num_users), dtype=float)
    adaptive = (system.is_time_switching | system.is_power_splitting).any()
    if adaptive:
        _, point = fixed_point_fractions(system, dist, weights)
    else:
        point = solve_boundary(system, dist, weights)
    sim = _sim_from_dict(cfg.get("sim", {}), system, seed_override=seed)
    report = simulate(system, point.policy, dist, sim)
    _write_json(out / "sim_report.json", report.to_dict())
    report.write_window_csv(out / "sim_windows.csv")
    _write_json(out / "resolved_config.json", {
        "system": system.to_dict(),
        "weights": weights.tolist(),
        "boundary_rates_nats": point.rates.tolist(),
        "horizon": sim.horizon,
        "seed": sim.seed,
    })
    if not quiet:
        print(f"wrote {out / 'sim_report.json'} "
              f"(rates {report.empirical_rates}, scale {report.policy_scale:.4f})")
    return EXIT_OK


def _cmd_mac_region(cfg: dict, out: Path, points, quiet: bool) -> int:
    mac_cfg = _mac_from_dict(cfg["mac"])
    dist = _fading_from_dict(cfg["fading"])
    n = points or int(cfg.get("solver", {}).get("num_points", 32))
    tr_mac = mac_trace(mac_cfg, dist, n)
    tr_mac.to_csv(out / "mac_trace.csv")
    _write_failures(out, "mac_trace", tr_mac)
    bc_points = int(cfg.get("solver", {}).get("bc_num_points", max(2 * n, 64)))
    tr_bc = trace_region(mac_cfg.bc_equivalent(), dist, bc_points)
    tr_bc.to_csv(out / "bc_trace.csv")
    _write_failures(out, "bc_trace", tr_bc)
    report = duality_containment(tr_mac, tr_bc)
    _write_json(out / "duality_report.json", {
        "all_inside": bool(report["all_inside"]),
        "max_violation": report["max_violation"],
        "tolerance": report["tolerance"],
        "num_points": report["num_points"],
    })
    if not quiet:
        print(f"wrote {out / 'mac_trace.csv'}; containment: {report['all_inside']}")
    if not tr_mac.points:
        raise ConvergenceError("no MAC boundary point could be computed", tr_mac.failures)
    return EXIT_OK


# ---------------------------------------------------------------------------
# built-in experiment presets (two-user setup of the numerical study)
# ---------------------------------------------------------------------------

BASE_SYSTEM = {
    "noise_vars": [0.8, 1.6],
    "min_rates_kbps": [300.0, 150.0],
    "deficits_uW": [60.0, 30.0],
    "efficiency": 1e-4,
    "tx_budget_W": 10.0,
    "architectures": ["ideal", "ideal"],
}

BASE_FADING = {
    "kind": "discretized-exponential",
    "mean_gains": [0.8, 0.5],
    "step": 0.1,
    "cap": 10.0,
}

BASE_MAC = {
    "budgets_W": [6.0, 4.0],
    "noise_var": 1.0,
    "min_rates_kbps": [300.0, 150.0],
    "deficit_uW": 60.0,
    "efficiency": 1e-4,
}


def _preset_curves(figure: str) -> dict:
    sys_ = lambda **kw: {**BASE_SYSTEM, **kw}
    if figure == "fig2":
        return {
            "ideal": sys_(),
            "time_switching": sys_(architectures=["time_switching"] * 2),
            "power_splitting": sys_(architectures=["power_splitting"] * 2),
            "ideal_no_min_rates": sys_(min_rates_kbps=[0.0, 0.0]),
            "no_rf_baseline": sys_(deficits_uW=[0.0, 0.0]),
        }
    if figure == "fig3":
        mixed = ["power_splitting", "time_switching"]
        return {
            "all_ts_10W": sys_(architectures=["time_switching"] * 2),
            "all_ps_10W": sys_(architectures=["power_splitting"] * 2),
            "mixed_ps_ts_10W": sys_(architectures=mixed),
            "mixed_ps_ts_15W": sys_(architectures=mixed, tx_budget_W=15.0),
        }
    if figure == "fig4":
        ts = ["time_switching"] * 2
        return {
            "ts_deficit_30_15uW": sys_(architectures=ts, deficits_uW=[30.0, 15.0]),
            "ts_deficit_60_30uW": sys_(architectures=ts),
            "ts_deficit_120_60uW": sys_(architectures=ts, deficits_uW=[120.0, 60.0]),
        }
    if figure == "fig5":
        ps = ["power_splitting"] * 2
        return {
            "ps_deficit_30_15uW": sys_(architectures=ps, deficits_uW=[30.0, 15.0]),
            "ps_deficit_60_30uW": sys_(architectures=ps),
            "ps_deficit_120_60uW": sys_(architectures=ps, deficits_uW=[120.0, 60.0]),
        }
    raise ConfigError(f"unknown figure preset: {figure!r}")


def _cmd_figure_preset(figure: str, out: Path, points, quiet: bool) -> int:
    if figure == "fig6":
        cfg = {"mac": dict(BASE_MAC), "fading": dict(BASE_FADING),
               "solver": {"num_points": points or 32}}
        return _cmd_mac_region(cfg, out, points, quiet)
    curves = _preset_curves(figure)
    dist = _fading_from_dict(BASE_FADING)
    n = points or 33
    resolved = {}
    for name, sys_dict in curves.items():
        system = _system_from_dict(sys_dict)
        trace = trace_region(system, dist, n)
        trace.to_csv(out / f"{figure}_{name}.csv")
        _write_failures(out, f"{figure}_{name}", trace)
        resolved[name] = system.to_dict()
        if not quiet:
            print(f"{figure}/{name}: {len(trace.points)} points, "
                  f"{len(trace.failures)} failed directions")
    _write_json(out / f"{figure}_resolved_config.json",
                {"curves": resolved, "fading": BASE_FADING, "num_points": n})
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="swipt", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("command", choices=["region", "simulate", "mac-region", "figure-preset"])
    p.add_argument("figure", nargs="?",
                   help="fig2..fig6, required for figure-preset")
    p.add_argument("--config", help="experiment description (JSON)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="simulation seed override")
    p.add_argument("--points", type=int, default=None, help="boundary points per trace")
    p.add_argument("--quiet", action="store_true")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_IO

    needs_config = args.command in ("region", "simulate", "mac-region")
    if needs_config and not args.config:
        raise ConfigError(f"{args.command} requires --config")
    if args.command == "figure-preset" and args.figure not in (
            "fig2", "fig3", "fig4", "fig5", "fig6"):
        raise ConfigError("figure-preset requires one of fig2..fig6")

    if args.command == "figure-preset":
        return _cmd_figure_preset(args.figure, out, args.points, args.quiet)
    cfg = _load_config(args.config)
    if args.command == "region":
        return _cmd_region(cfg, out, args.points, args.quiet)
    if args.command == "simulate":
        return _cmd_simulate(cfg, out, args.points, args.seed, args.quiet)
    return _cmd_mac_region(cfg, out, args.points, args.quiet)


def main(argv=None) -> int:
    try:
        return run(argv)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConvergenceError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGE
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
