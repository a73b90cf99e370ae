"""Command line front end: ``anscombe-lab estimate|verify|oracle|compare``.

Exit status: 0 on success, 1 when the inequality check fails, 2 on config
errors, 3 on a TheoremViolation, 4 when a Monte Carlo value sits more than
four standard errors from its exact value, 5 on any other library error.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import __version__
from .config import ScenarioConfig, canonical_config, load_config
from .distributions import FiniteDistribution, PointMass, RngStream, law_to_finite
from .errors import (
    AnscombeLabError,
    ConfigParseError,
    SupportTooLarge,
    TheoremViolation,
    UnsupportedSetForLaw,
    ValidationError,
)
from .indices import chi_ansc, infimum_over_kn, lambda_w, verify_inequality, window_bounds
from .oracle import (
    exact_chi_surrogate,
    exact_lambda_p,
    exact_lambda_w,
    lambda_w_five_forms,
    marginal,
    mc_vs_oracle_compare,
    proof_inclusion_batch,
    scenario_spec,
)
from .processes import required_horizon
from .report import RunReport

EXIT_OK = 0
EXIT_INEQUALITY = 1
EXIT_CONFIG = 2
EXIT_THEOREM = 3
EXIT_COMPARE = 4
EXIT_ERROR = 5

PROOF_PATHS = 2000


def _report(command, cfg: ScenarioConfig, verdict, ok, **kw) -> RunReport:
    return RunReport(
        command=command,
        config=canonical_config(cfg.echo()),
        version=__version__,
        verdict=verdict,
        ok=ok,
        **kw,
    )


def run_estimate(cfg: ScenarioConfig, threads: int = 1) -> RunReport:
    sc = cfg.scenario
    root = RngStream(sc.seed)
    ests = []
    for q in cfg.quantities:
        if q == "chi_ansc":
            ests.append(chi_ansc(sc.process, sc.grid, root.substream("chi"), threads))
        elif q == "lambda_w":
            ests.append(
                lambda_w(sc.process, sc.target, sc.family, sc.grid, root.substream("lw"), threads=threads)
            )
        elif q == "lambda_w_randomized":
            ests.append(
                lambda_w(
                    sc.process,
                    sc.target,
                    sc.family,
                    sc.grid,
                    root.substream("lwr"),
                    index_model=sc.index_model,
                    threads=threads,
                )
            )
        elif q == "lambda_p":
            _, best, _ = infimum_over_kn(
                sc.index_model, sc.kn_family, sc.grid, root.substream("kn"), threads
            )
            ests.append(best)
    summary = " ".join(f"{e.name}={e.value:.4f}" for e in ests)
    return _report("estimate", cfg, f"estimate ok: {summary}", True, estimates=ests)


def _proof_screen(cfg: ScenarioConfig, kn) -> dict:
    """Sampled realizations of the pathwise inclusion at a few window points."""
    sc = cfg.scenario
    grid = sc.grid
    ns = sorted({grid.n_values[0], grid.n_values[len(grid.n_values) // 2], grid.n_values[-1]})
    ks = [int(k) for k in kn.values(ns)]
    horizon = max(
        required_horizon(sc.index_model, ns),
        max(window_bounds(k, d)[1] for k in ks for d in grid.delta_grid),
    )
    gen = RngStream(sc.seed).substream("proof").generator()
    count = min(grid.samples, PROOF_PATHS)
    paths = sc.process.sample_paths(gen, count, horizon)
    N = sc.index_model.sample(gen, ns, count)
    totals: dict = {}
    for j, k in enumerate(ks):
        for d in grid.delta_grid:
            for e in grid.epsilon_grid:
                for F in sc.family:
                    res = proof_inclusion_batch(paths, sc.process.space, N[:, j], k, d, e, F)
                    for key, v in res.items():
                        totals[key] = totals.get(key, 0) + v
    return totals


def run_verify(cfg: ScenarioConfig, threads: int = 1) -> RunReport:
    rep = verify_inequality(cfg.scenario, threads)
    inequality = rep.to_dict(tables=False)
    inequality["proof_inclusion"] = _proof_screen(cfg, rep.kn)
    status = "pass" if rep.passed else "FAIL"
    verdict = (
        f"verify {status}: lhs={rep.lhs.value:.4f} rhs={rep.rhs:.4f} "
        f"(weak={rep.rhs_weak.value:.4f} chi={rep.rhs_chi.value:.4f} "
        f"lp={rep.rhs_lp.value:.4f}) slack={rep.slack['total']:.4f}"
    )
    return _report(
        "verify",
        cfg,
        verdict,
        rep.passed,
        estimates=[rep.lhs, rep.rhs_weak, rep.rhs_chi, rep.rhs_lp],
        inequality=inequality,
    )


def run_oracle(cfg: ScenarioConfig, threads: int = 1) -> RunReport:
    sc = cfg.scenario
    spec = scenario_spec(sc)
    grid = sc.grid
    values = {
        "chi_ansc": exact_chi_surrogate(spec, grid),
        "lambda_w": exact_lambda_w(spec, sc.target, sc.family),
        "lambda_w_randomized": exact_lambda_w(spec, sc.target, sc.family, randomized=True),
    }
    per_kn = {kn.label(): exact_lambda_p(spec, kn, grid) for kn in sc.kn_family}
    for label, v in per_kn.items():
        values[f"lambda_p[{label}]"] = v
    values["lambda_p_infimum"] = min(per_kn.values())
    oracle = {"values": values}
    if isinstance(sc.target, (FiniteDistribution, PointMass)):
        try:
            margs = [marginal(spec, n) for n in grid.n_values]
            alpha = None if grid.alpha_grid == "auto" else grid.alpha_grid
            five = lambda_w_five_forms(margs, law_to_finite(sc.target), alpha)
            oracle["five_forms"] = {
                "function": five.function_form,
                "enlargement": five.enlargement_form,
                "open": five.open_form,
                "closed": five.closed_form,
                "continuity": five.continuity_form,
                "spread": five.spread(),
            }
        except (SupportTooLarge, UnsupportedSetForLaw) as exc:
            oracle["five_forms"] = {"skipped": str(exc)}
    summary = " ".join(f"{k}={v:.4f}" for k, v in sorted(values.items()))
    return _report("oracle", cfg, f"oracle ok: {summary}", True, oracle=oracle)


def run_compare(cfg: ScenarioConfig, threads: int = 1) -> RunReport:
    rows = mc_vs_oracle_compare(cfg.scenario, threads)
    flagged = [r.name for r in rows if r.flagged]
    ok = not flagged
    worst = max(rows, key=lambda r: abs(r.z) if np.isfinite(r.z) else np.inf)
    verdict = (
        f"compare {'ok' if ok else 'FLAGGED'}: {len(rows)} rows, max |z|={abs(worst.z):.2f} ({worst.name})"
    )
    if flagged:
        verdict += f"; flagged: {', '.join(flagged)}"
    return _report("compare", cfg, verdict, ok, comparison=[r.to_dict() for r in rows])


COMMANDS = {
    "estimate": (run_estimate, EXIT_OK),
    "verify": (run_verify, EXIT_INEQUALITY),
    "oracle": (run_oracle, EXIT_OK),
    "compare": (run_compare, EXIT_COMPARE),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anscombe-lab",
        description="Convergence-defect indices for randomly indexed sequences.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--seed", type=int, metavar="U64", help="override the config seed")
        p.add_argument("--samples", type=int, metavar="N", help="override the config sample count")
        p.add_argument("--out", metavar="PATH", help="write the report here")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--threads", type=int, default=1, metavar="N")
        p.add_argument(
            "--timing", action="store_true", help="record wall time in the report (breaks byte-equality)"
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    run, fail_code = COMMANDS[args.command]
    try:
        cfg = load_config(args.config, seed=args.seed, samples=args.samples, verify=args.command == "verify")
    except ConfigParseError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        print(f"{args.command} error: config could not be parsed")
        return EXIT_CONFIG
    except ValidationError as exc:
        for v in exc.violations:
            print(f"{exc.code}: {v}", file=sys.stderr)
        print(f"{args.command} error: config has {len(exc.violations)} violation(s)")
        return EXIT_CONFIG

    start = time.perf_counter()
    try:
        report = run(cfg, args.threads)
    except TheoremViolation as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        print(f"{args.command} FAIL: theorem violation")
        return EXIT_THEOREM
    except AnscombeLabError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        print(f"{args.command} error: {exc.code}")
        return EXIT_ERROR
    elapsed = time.perf_counter() - start
    print(f"wall time {elapsed:.2f}s", file=sys.stderr)
    if args.timing:
        report.wall_time = elapsed

    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(report.render(args.format))
    else:
        print("no --out given; report not written", file=sys.stderr)
    print(report.verdict)
    return EXIT_OK if report.ok else fail_code


if __name__ == "__main__":
    sys.exit(main())
