"""Command-line front end: closed-form queries, simulation, optimization,
and sweep experiments with CSV output.

Subcommands: analytic, simulate, optimize, sweep, selftest. Options can
come from flags or from a key=value config file (flags win). Exit codes:
0 success, 2 invalid parameters, 3 undeliverable configuration, 4 I/O
failure, 1 failed self-check.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, TextIO

import numpy as np

from . import __version__
from .analytic import average_aoi, average_aoi_noncooperative, moments
from .model import (
    LinkProbabilities,
    ParameterError,
    SystemParams,
    UndeliverableError,
)
from .optimizer import (
    audit_derivative_signs,
    audit_sign_cases,
    numerical_optimal_p,
    optimal_p,
    sample_closed_form_domain,
)
from .simulator import Mode, SimulationConfig, run, run_with_records

SWEEP_MODES = ("coop-analytic", "coop-sim", "noncoop-analytic", "noncoop-sim")
SWEEP_COLUMNS = "variable_value,mode,avg_aoi,stderr,p,p1,p2,p3,n_slots,seed"

_DEFAULT_SLOTS = 10_000_000
_DEFAULT_WARMUP = 10_000


def _f10(x: float) -> str:
    return f"{x:.10g}"


def _f6(x: float) -> str:
    return f"{x:.6g}"


def read_config_file(path: str) -> dict[str, str]:
    """Parse a key=value config file; '#' starts a comment, blanks ignored."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, value = line.split("=", 1)
            values[key.strip().replace("-", "_")] = value.strip()
    return values


class Options:
    """Flag values overlaid on config-file values overlaid on defaults."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = read_config_file(args.config) if getattr(args, "config", None) else {}

    def get(self, name: str, conv, default=None, required: bool = False):
        value = getattr(self.args, name, None)
        if value is None and name in self.config:
            raw = self.config[name]
            try:
                value = conv(raw)
            except ValueError as exc:
                raise ParameterError(f"config value {name}={raw!r}: {exc}") from exc
        if value is None:
            value = default
        if value is None and required:
            raise ParameterError(f"missing required option --{name}")
        return value


def _mode(text: str) -> Mode:
    try:
        return Mode(text)
    except ValueError:
        raise ParameterError(f"mode must be 'coop' or 'noncoop', got {text!r}") from None


def _sweep_modes(text: str) -> tuple[str, ...]:
    chosen = tuple(token.strip() for token in text.split(",") if token.strip())
    if not chosen:
        raise ParameterError("modes must name at least one sweep mode")
    for token in chosen:
        if token not in SWEEP_MODES:
            raise ParameterError(
                f"unknown sweep mode {token!r}; choose from {', '.join(SWEEP_MODES)}"
            )
    return chosen


def _sim_options(opts: Options) -> dict:
    return {
        "slots": opts.get("slots", int, _DEFAULT_SLOTS),
        "seed": opts.get("seed", int, 0),
        "reps": opts.get("reps", int, 1),
        "warmup": opts.get("warmup", int, _DEFAULT_WARMUP),
        "jobs": opts.get("jobs", int, None),
    }


def _params_from(opts: Options, require_p: bool = True) -> SystemParams:
    p = opts.get("p", float, required=require_p)
    return SystemParams.of(
        p=p,
        p1=opts.get("p1", float, required=True),
        p2=opts.get("p2", float, required=True),
        p3=opts.get("p3", float, required=True),
    )


def cmd_analytic(opts: Options, out: TextIO) -> int:
    params = _params_from(opts)
    print(f"avg_aoi={_f10(average_aoi(params))}", file=out)
    if 0.0 < params.p < 1.0 and params.p2 < 1.0:
        bundle = moments(params)
        for name in ("e_s", "e_w", "e_w2", "e_t", "e_t2", "e_z", "e_z2"):
            print(f"{name}={_f10(getattr(bundle, name))}", file=out)
    return 0


def cmd_simulate(opts: Options, out: TextIO) -> int:
    sim = _sim_options(opts)
    cycles_out = opts.get("cycles_out", str, None)
    config = SimulationConfig(
        params=_params_from(opts),
        n_slots=sim["slots"],
        n_replications=sim["reps"],
        seed=sim["seed"],
        mode=_mode(opts.get("mode", str, "coop")),
        record_cycles=cycles_out is not None,
        warmup_slots=sim["warmup"],
    )
    summary, records = run_with_records(config, max_workers=sim["jobs"])
    for name in ("avg_aoi", "stderr", "mean_s", "mean_w", "mean_t", "mean_z",
                 "mean_z2", "cov_s_z"):
        print(f"{name}={_f6(getattr(summary, name))}", file=out)
    for name in ("n_slots", "n_cycles", "seed"):
        print(f"{name}={getattr(summary, name)}", file=out)
    if cycles_out is not None:
        with open(cycles_out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("s_k,w_k,t_k,z_k,q_k\n")
            for i in range(len(records)):
                fh.write(
                    f"{records.s[i]},{records.w[i]},{records.t[i]},"
                    f"{records.z[i]},{_f10(records.q[i])}\n"
                )
    return 0


def cmd_optimize(opts: Options, out: TextIO) -> int:
    links = LinkProbabilities(
        p1=opts.get("p1", float, required=True),
        p2=opts.get("p2", float, required=True),
        p3=opts.get("p3", float, required=True),
    )
    if links.in_closed_form_domain():
        result, method = optimal_p(links), "closed-form"
    else:
        result, method = numerical_optimal_p(links), "numerical"
        print("note=outside closed-form domain, numerical minimizer used", file=out)
    print(f"p_star={_f10(result.p_star)}", file=out)
    print(f"branch={result.branch.value}", file=out)
    print(f"aoi_at_optimum={_f10(result.aoi_at_optimum)}", file=out)
    threshold = "" if result.threshold_p1 is None else _f10(result.threshold_p1)
    print(f"threshold_p1={threshold}", file=out)
    print(f"method={method}", file=out)
    return 0


def _sweep_value(var: str, value: float, fixed: dict[str, float],
                 mode: str, sim: dict) -> tuple[float, float | None]:
    """(avg_aoi, stderr) at one grid point for one mode."""
    point = dict(fixed)
    point[var] = value
    if mode == "coop-analytic":
        return average_aoi(SystemParams.of(**point)), None
    if mode == "noncoop-analytic":
        return average_aoi_noncooperative(point["p"], point["p1"]), None
    config = SimulationConfig(
        params=SystemParams.of(**point),
        n_slots=sim["slots"],
        n_replications=sim["reps"],
        seed=sim["seed"],
        mode=Mode.COOPERATIVE if mode == "coop-sim" else Mode.NON_COOPERATIVE,
        warmup_slots=sim["warmup"],
    )
    summary = run(config)
    return summary.avg_aoi, summary.stderr


def cmd_sweep(opts: Options, out: TextIO) -> int:
    var = opts.get("var", str, required=True)
    if var not in ("p", "p1", "p2", "p3"):
        raise ParameterError(f"var must be one of p, p1, p2, p3, got {var!r}")
    start = opts.get("start", float, required=True)
    stop = opts.get("stop", float, required=True)
    steps = opts.get("steps", int, required=True)
    modes = _sweep_modes(opts.get("modes", str, "coop-analytic"))
    sim = _sim_options(opts)

    if steps < 2:
        raise ParameterError(f"steps must be >= 2, got {steps}")
    low = 0.0 if var != "p" else sys.float_info.min
    if not (low <= start < stop <= 1.0):
        raise ParameterError(
            f"need {('0 <=' if var != 'p' else '0 <')} start < stop <= 1 for {var}"
        )
    fixed: dict[str, float] = {}
    relay_needed = any(m.startswith("coop") for m in modes)
    for name in ("p", "p1", "p2", "p3"):
        if name == var:
            fixed[name] = float("nan")  # substituted per grid point
            continue
        default = None if relay_needed or name in ("p", "p1") else 0.0
        fixed[name] = opts.get(name, float, default, required=True)

    grid = np.linspace(start, stop, steps)
    sim_cells = [
        (i, mode) for i in range(steps) for mode in modes if mode.endswith("-sim")
    ]
    sim_results: dict[tuple[int, str], tuple[float, float | None]] = {}
    if sim_cells:
        def compute(cell):
            i, mode = cell
            return cell, _sweep_value(var, float(grid[i]), fixed, mode, sim)
        if sim["jobs"] == 1 or len(sim_cells) == 1:
            computed = map(compute, sim_cells)
        else:
            with ThreadPoolExecutor(max_workers=sim["jobs"]) as pool:
                computed = list(pool.map(compute, sim_cells))
        sim_results = dict(computed)

    fixed_desc = " ".join(
        f"{k}={'-' if k == var else _f10(v)}" for k, v in fixed.items()
    )
    lines = [
        f"# aoi-relay {__version__} sweep var={var} start={_f10(start)} "
        f"stop={_f10(stop)} steps={steps} modes={','.join(modes)} {fixed_desc} "
        f"slots={sim['slots']} reps={sim['reps']} warmup={sim['warmup']} "
        f"seed={sim['seed']}",
        SWEEP_COLUMNS,
    ]
    for i, value in enumerate(grid):
        point = dict(fixed)
        point[var] = float(value)
        for mode in modes:
            if mode.endswith("-sim"):
                avg, stderr = sim_results[(i, mode)]
                avg_text, stderr_text = _f6(avg), "" if stderr is None else _f6(stderr)
                slots_text, seed_text = str(sim["slots"]), str(sim["seed"])
            else:
                avg, _ = _sweep_value(var, float(value), fixed, mode, sim)
                avg_text, stderr_text, slots_text, seed_text = _f10(avg), "", "", ""
            lines.append(
                f"{_f10(value)},{mode},{avg_text},{stderr_text},"
                f"{_f10(point['p'])},{_f10(point['p1'])},{_f10(point['p2'])},"
                f"{_f10(point['p3'])},{slots_text},{seed_text}"
            )
    text = "\n".join(lines) + "\n"
    out_path = opts.get("out", str, None)
    if out_path is None:
        out.write(text)
    else:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return 0


def cmd_selftest(opts: Options, out: TextIO) -> int:
    samples = opts.get("samples", int, 100_000)
    pairs = opts.get("pairs", int, 1_000)
    seed = opts.get("seed", int, 42)
    failures = 0

    audit = audit_sign_cases(samples, seed=seed)
    for name in (
        "c_nonnegative", "disc_nonpositive", "form_disagreements", "a_neg_b_pos",
        "b_bound_violations", "neg_a_at_bound_nonneg", "mu_nonpositive",
        "xi_nonnegative",
    ):
        count = getattr(audit, name)
        failures += count > 0
        print(f"{name}: {'PASS' if count == 0 else 'FAIL'} ({count}/{samples})", file=out)

    mismatches = audit_derivative_signs(pairs, seed=seed)
    failures += mismatches > 0
    print(
        f"derivative_sign_agreement: {'PASS' if mismatches == 0 else 'FAIL'} "
        f"({mismatches}/{pairs})",
        file=out,
    )

    rng = np.random.default_rng(seed)
    worst = 0.0
    for p1, p2, p3 in sample_closed_form_domain(rng, 200):
        links = LinkProbabilities(p1, p2, p3)
        worst = max(worst, abs(optimal_p(links).p_star - numerical_optimal_p(links).p_star))
    ok = worst < 1e-6
    failures += not ok
    print(
        f"closed_vs_numerical_optimum: {'PASS' if ok else 'FAIL'} "
        f"(worst |dp|={worst:.3e} over 200 points)",
        file=out,
    )
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aoi-relay",
        description=(
            "Average age of information in a source-relay-destination "
            "status-update system: closed forms, optimal generation "
            "probability, and a validating Monte Carlo simulator."
        ),
    )
    parser.add_argument("--version", action="version", version=f"aoi-relay {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp, with_p=True):
        sp.add_argument("--config", help="key=value config file; flags take precedence")
        if with_p:
            sp.add_argument("--p", type=float, help="update generation probability")
        sp.add_argument("--p1", type=float, help="source->destination success probability")
        sp.add_argument("--p2", type=float, help="source->relay success probability")
        sp.add_argument("--p3", type=float, help="relay->destination success probability")

    def add_sim(sp):
        sp.add_argument("--slots", type=int, help=f"slots per replication (default {_DEFAULT_SLOTS})")
        sp.add_argument("--seed", type=int, help="master RNG seed (default 0)")
        sp.add_argument("--reps", type=int, help="independent replications (default 1)")
        sp.add_argument("--warmup", type=int, help=f"slots excluded from averages (default {_DEFAULT_WARMUP})")
        sp.add_argument("--jobs", type=int, help="max parallel workers (default: executor's choice)")

    sp = sub.add_parser("analytic", help="closed-form average age and cycle moments")
    add_common(sp)

    sp = sub.add_parser("simulate", help="Monte Carlo estimate of the average age")
    add_common(sp)
    add_sim(sp)
    sp.add_argument("--mode", choices=[m.value for m in Mode], help="coop (default) or noncoop")
    sp.add_argument("--cycles-out", dest="cycles_out", help="write per-cycle records to this CSV")

    sp = sub.add_parser("optimize", help="generation probability minimizing the average age")
    add_common(sp, with_p=False)

    sp = sub.add_parser("sweep", help="sweep one parameter, writing one CSV row per point and mode")
    add_common(sp)
    add_sim(sp)
    sp.add_argument("--var", choices=["p", "p1", "p2", "p3"], help="parameter to sweep")
    sp.add_argument("--start", type=float)
    sp.add_argument("--stop", type=float)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--modes", help="comma-separated subset of: " + ", ".join(SWEEP_MODES))
    sp.add_argument("--out", help="CSV output path (default: stdout)")

    sp = sub.add_parser("selftest", help="re-verify the optimizer's sign analysis and cross-checks")
    sp.add_argument("--config", help="key=value config file; flags take precedence")
    sp.add_argument("--samples", type=int, help="domain samples for the sign audit (default 100000)")
    sp.add_argument("--pairs", type=int, help="finite-difference sign probes (default 1000)")
    sp.add_argument("--seed", type=int, help="audit RNG seed (default 42)")
    return parser


_COMMANDS = {
    "analytic": cmd_analytic,
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "selftest": cmd_selftest,
}


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](Options(args), sys.stdout)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except UndeliverableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
