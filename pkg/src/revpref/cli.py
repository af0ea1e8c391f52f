"""Command-line entry point.

Exit codes: 0 consistent / H0, 1 inconsistent / H1, 2 error.  JSON reports go
to stdout unless ``--out`` is given.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import afriat, changepoint, garp, jl, noisy, sim
from .core import RevPrefError, read_csv, write_csv

EXIT_OK, EXIT_REJECT, EXIT_ERROR = 0, 1, 2


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _cmd_check(args) -> int:
    d = read_csv(args.dataset)
    if args.embed is not None or d.m > args.max_m:
        eps, beta, seed = args.embed if args.embed is not None else (0.1, 0.65, args.seed)
        cfg = jl.EmbeddingConfig.for_dataset(d, float(eps), float(beta), int(seed))
        report = jl.garp_embedded(d, cfg)
        verdict = report.verdict
        payload = {"method": "embedded", **report.verdict.to_dict(), "embedding": {**cfg.to_dict(), **report.to_dict()}}
        payload["embedding"].pop("verdict")
    else:
        verdict = garp.garp(d)
        payload = {"method": "exact", **verdict.to_dict()}
        if verdict.passed:
            cert = afriat.afriat_feasibility(d)
            payload["certificate"] = None if cert is None else cert.to_dict()
    _emit(payload, args.out)
    return EXIT_OK if verdict.passed else EXIT_REJECT


def _write_curve(path: str, curve: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["tau", "phi"])
        for tau, phi in enumerate(curve, start=1):
            w.writerow([tau, repr(float(phi))])


def _cmd_detect(args) -> int:
    if args.noisy is None:
        d = read_csv(args.dataset)
        report = changepoint.detect_change_point(d)
        payload = {"mode": "deterministic", "feasible_taus": report.taus, "headline_tau": report.headline}
        if report.headline is not None:
            cert = changepoint.recover_min_alpha(d, report.headline)
            payload["min_alpha_certificate"] = None if cert is None else cert.to_dict()
        _emit(payload, args.out)
        return EXIT_OK if report.headline is not None else EXIT_REJECT

    sigma, gamma, n_samples, seed = args.noisy
    d = read_csv(args.dataset, allow_negative_responses=True)
    rep = noisy.run_noisy_test(
        d, float(gamma), args.mode, int(n_samples), noise_sigma=float(sigma), seed=int(seed)
    )
    curve = rep.phi_curve
    if curve is None and args.curve_out:
        curve = noisy.phi_curve(d)
    if args.curve_out:
        _write_curve(args.curve_out, curve)
    _emit(rep.to_dict(), args.out)
    return EXIT_OK if rep.decision is noisy.Decision.H0 else EXIT_REJECT


def _load_config(path: str) -> tuple[sim.CobbDouglasAgent, dict]:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError("config must be a JSON object")
    extra = {k: raw[k] for k in ("T", "probe_low", "probe_high") if k in raw}
    return sim.CobbDouglasAgent.from_dict(raw), extra


def _cmd_simulate(args) -> int:
    agent, extra = _load_config(args.config)
    T = int(extra.get("T", args.T))
    rng = np.random.default_rng(args.seed)
    probes = sim.random_probes(T, agent.m, rng, extra.get("probe_low", 1.0), extra.get("probe_high", 2.0))
    clean, noisy_d = sim.generate(agent, probes, rng)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(clean, out / "clean.csv")
    write_csv(noisy_d, out / "noisy.csv")
    (out / "agent.json").write_text(json.dumps(agent.to_dict(), indent=2) + "\n", encoding="utf-8")
    _emit({"clean": str(out / "clean.csv"), "noisy": str(out / "noisy.csv"), "T": T, "seed": args.seed}, None)
    return EXIT_OK


def _cmd_roc(args) -> int:
    agent, extra = _load_config(args.config)
    table = sim.roc_harness(
        agent,
        args.n_trials,
        T=int(extra.get("T", args.T)),
        seed=args.seed,
        probe_low=extra.get("probe_low", 1.0),
        probe_high=extra.get("probe_high", 2.0),
        n_samples=args.n_samples,
        rp_mode=args.rp_mode,
    )
    table.write_csv(args.out)
    _emit({"out": args.out, "auc": {m: table.auc(m) for m in table.methods()}}, None)
    return EXIT_OK


def _read_probes(path: str) -> np.ndarray:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for r in csv.reader(fh):
            cells = [c.strip() for c in r if c.strip()]
            if not cells:
                continue
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                if rows:
                    raise
                continue  # header line
    if not rows:
        raise ValueError(f"{path}: no probe rows")
    return np.asarray(rows, dtype=float)


def _cmd_predict(args) -> int:
    d = read_csv(args.dataset)
    cert = afriat.afriat_feasibility(d)
    phi = 0.0
    if cert is None:
        # inconsistent data: use the least-adjusted certificate instead
        phi, cert = noisy.phi_star_classical(d)
    u = afriat.reconstruct_utility(d, cert)
    preds = [afriat.predict_response(u, p, args.budget).to_dict() for p in _read_probes(args.probes)]
    _emit({"phi_star": phi, "budget": args.budget, "predictions": preds}, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="revpref", description="Revealed-preference tests for utility maximization and change points."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help: str, *, seeded: bool = False) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        if seeded:
            p.add_argument("--seed", type=int, default=0, help="seed for all randomness (default 0)")
        return p

    p = command("check", "GARP / Afriat consistency of a dataset", seeded=True)
    p.add_argument("dataset")
    p.add_argument("--embed", nargs=3, metavar=("EPS", "BETA", "SEED"), help="check on a random projection")
    p.add_argument("--max-m", type=int, default=10000, help="widest probe checked exactly (default 10000)")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_check)

    p = command("detect", "change-point detection (deterministic or noisy)")
    p.add_argument("dataset")
    p.add_argument("--noisy", nargs=4, metavar=("SIGMA", "GAMMA", "N_SAMPLES", "SEED"))
    p.add_argument("--mode", choices=[m.value for m in noisy.Mode], default="perturbed")
    p.add_argument("--curve-out", help="write the Phi_tau-vs-tau curve as CSV (noisy mode)")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_detect)

    p = command("simulate", "write clean and noisy datasets from an agent config", seeded=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--T", type=int, default=50)
    p.set_defaults(func=_cmd_simulate)

    p = command("roc", "ROC table comparing the RP test with CUSUM", seeded=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-trials", type=int, default=200)
    p.add_argument("--n-samples", type=int, default=2000, help="Monte Carlo draws per p-value")
    p.add_argument("--rp-mode", choices=[m.value for m in noisy.Mode], default="classical")
    p.add_argument("--T", type=int, default=50)
    p.set_defaults(func=_cmd_roc)

    p = command("predict", "predict responses to new probes")
    p.add_argument("dataset")
    p.add_argument("probes", help="CSV with one probe per row")
    p.add_argument("--budget", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_predict)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (RevPrefError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
