"""Command-line front end: analyze, filter, montecarlo, verify.

Exit codes: 0 success, 1 property failure, 2 configuration error,
3 numeric failure. CSV numbers are serialized with shortest round-trip
decimals, so identical configs and seeds give byte-identical outputs.
"""

import argparse
import json
import sys as _sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from lrkb import oja, riccati, sim, spectral, systems, verify
from lrkb.errors import (
    ConfigError,
    ConvergenceError,
    FrameError,
    GapError,
    LrkbError,
    ValidationError,
)

EXIT_OK = 0
EXIT_PROPERTY_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERIC_FAILURE = 3


@dataclass
class ScenarioConfig:
    system: systems.LtiSystem
    rank: object = "auto"
    epsilon: float = 1.0
    dt: float = 0.01
    dt_sim: float = None
    t_max: float = 10.0
    seed: int = 0
    n_paths: int = 100
    x0: np.ndarray = None
    xhat0: np.ndarray = None
    output_dir: str = "out"

    def __post_init__(self):
        n = self.system.n
        if self.dt_sim is None:
            self.dt_sim = self.dt
        for name in ("epsilon", "dt", "dt_sim", "t_max"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(f"field '{name}' must be a positive number, got {v!r}")
        if not 0 < self.epsilon <= 1:
            raise ConfigError(f"field 'epsilon' must lie in (0, 1], got {self.epsilon}")
        if self.rank != "auto":
            if not isinstance(self.rank, int):
                raise ConfigError(f"field 'rank' must be an integer or 'auto', got {self.rank!r}")
            if not 1 <= self.rank <= n - 1:
                raise ConfigError(f"field 'rank'={self.rank} outside 1..{n - 1}")
        if not isinstance(self.n_paths, int) or self.n_paths < 1:
            raise ConfigError(f"field 'n_paths' must be a positive integer, got {self.n_paths!r}")
        self.x0 = np.zeros(n) if self.x0 is None else np.asarray(self.x0, dtype=float)
        self.xhat0 = (
            np.zeros(n) if self.xhat0 is None else np.asarray(self.xhat0, dtype=float)
        )
        if self.x0.shape != (n,) or self.xhat0.shape != (n,):
            raise ConfigError("fields 'x0'/'xhat0' must be length-n vectors")


def load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"malformed JSON in {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if "system" in doc:
        sys_obj, extras = systems.load_system(doc["system"])
    elif "system_file" in doc:
        sys_obj, extras = systems.load_system(doc["system_file"])
    else:
        raise ConfigError("config needs a 'system' object or a 'system_file' path")
    known = {
        "rank", "epsilon", "dt", "dt_sim", "t_max", "seed", "n_paths",
        "x0", "xhat0", "output_dir",
    }
    unknown = set(doc) - known - {"system", "system_file"}
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    kwargs = {k: doc[k] for k in known if k in doc}
    # System-file extras are defaults that the scenario may override.
    for src, dst in (("seed", "seed"), ("rank", "rank"), ("horizon", "t_max"), ("dt", "dt")):
        if src in extras and dst not in kwargs:
            kwargs[dst] = extras[src]
    return ScenarioConfig(system=sys_obj, **kwargs)


def _resolve_rank(cfg):
    if cfg.rank != "auto":
        return cfg.rank
    r = systems.minimal_rank(cfg.system)
    # The boundedness theorem only covers r >= 1; the CLI never runs r = 0.
    return max(r, 1)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2)
        fh.write("\n")


def cmd_analyze(cfg, out_dir):
    a = cfg.system.a
    spec = spectral.eigs_sorted(a)
    n = cfg.system.n
    gap_table = [
        {
            "r": r,
            "gap": float(spec.eigenvalues.real[r - 1] - spec.eigenvalues.real[r]),
            "ok": spectral.spectral_gap_ok(spec, r),
        }
        for r in range(1, n)
    ]
    r_prime = spectral.count_unstable(spec)
    rank = _resolve_rank(cfg)
    schur = spectral.ordered_schur(a, rank)
    est = spectral.attraction_beta(schur)
    catalog = oja.enumerate_equilibria(a, rank)
    report = {
        "eigenvalues": [{"re": z.real, "im": z.imag} for z in spec.eigenvalues],
        "gap_table": gap_table,
        "unstable_count": r_prime,
        "rank": rank,
        "beta": est.beta,
        "ell_max": est.ell_max,
        "gap_ok": est.gap_ok,
        "equilibrium_families": [
            {
                "selection": [i + 1 for i in f.selection],
                "is_stable": f.is_stable,
                "linearization_rate": f.linearization_rate,
                "degenerate": f.degenerate,
            }
            for f in catalog
        ],
        "families_truncated": catalog.truncated,
    }
    _write_json(out_dir / "analysis.json", report)
    print(f"n={n}, rank={rank}, unstable eigenvalues r'={r_prime}, beta={est.beta}")
    for f in catalog:
        tag = "STABLE" if f.is_stable else "unstable"
        print(
            f"  selection {[i + 1 for i in f.selection]}: {tag} "
            f"(rate {f.linearization_rate:+.4g})"
        )
    return EXIT_OK


def cmd_filter(cfg, out_dir):
    rank = _resolve_rank(cfg)
    sys_obj = cfg.system
    frame = oja.stable_equilibrium(sys_obj.a, rank)
    report = riccati.rank_condition_report(sys_obj, rank)
    path = sim.simulate_truth(sys_obj, cfg.x0, cfg.dt_sim, cfg.t_max, cfg.seed)
    p0 = np.eye(sys_obj.n)
    full_run = sim.run_full_filter(sys_obj, path, cfg.xhat0, p0)
    lrkb_run = sim.run_lrkb_filter(sys_obj, path, frame, cfg.xhat0)
    with open(out_dir / "run.csv", "w") as fh:
        sim.export_run_csv(full_run, lrkb_run, fh)
    sol = riccati.reduced_steady_state(sys_obj, frame)
    spec = spectral.eigs_sorted(sys_obj.a)
    with open(out_dir / "closed_loop_eigs.csv", "w") as fh:
        riccati.export_closed_loop_csv(sol, spec, fh)
    traces = np.einsum("kii->k", lrkb_run.error_cov_pred)
    growth = float(np.max(traces) / max(traces[0], 1.0))
    summary = {
        "rank": rank,
        "unstable_count": report.unstable_count,
        "rank_sufficient": report.rank_sufficient,
        "max_closed_loop_real": report.max_closed_loop_real,
        "verdict": "bounded" if report.bounded else "unbounded",
        "growth_flag": bool(growth > 1e6),
        "trace_error_cov_final": float(traces[-1]),
        "seed": cfg.seed,
    }
    _write_json(out_dir / "summary.json", summary)
    print(
        f"rank={rank} (r'={report.unstable_count}): verdict "
        f"{summary['verdict']}, final predicted error trace {traces[-1]:.6g}"
    )
    return EXIT_OK


def cmd_montecarlo(cfg, out_dir):
    rank = _resolve_rank(cfg)
    sys_obj = cfg.system
    frame = oja.stable_equilibrium(sys_obj.a, rank)
    report = sim.monte_carlo(
        sys_obj, frame, cfg.dt_sim, cfg.t_max, cfg.n_paths, cfg.seed,
        x0=cfg.x0, xhat0=cfg.xhat0,
    )
    with open(out_dir / "montecarlo.csv", "w") as fh:
        sim.export_monte_carlo_csv(report, fh)
    summary = {
        "rank": rank,
        "n_paths": report.n_paths,
        "seed": report.seed,
        "max_rel_deviation": report.max_rel_deviation,
        "trace_empirical_final": float(report.trace_empirical[-1]),
        "trace_predicted_final": float(report.trace_predicted[-1]),
        "aggregated": report.n_paths > 1,
    }
    _write_json(out_dir / "montecarlo_summary.json", summary)
    print(
        f"{report.n_paths} paths: final empirical trace "
        f"{summary['trace_empirical_final']:.6g} vs predicted "
        f"{summary['trace_predicted_final']:.6g}"
    )
    return EXIT_OK


def cmd_verify(only, seed, tol_scale, out_dir):
    results = verify.run_suites(only=only, seed=seed, tol_scale=tol_scale)
    failed = False
    for res in results:
        print(f"{'PASS' if res.passed else 'FAIL'} {res.name}: {res.detail}")
        if not res.passed:
            failed = True
            if res.witness:
                witness_path = out_dir / f"witness_{res.name}.npz"
                np.savez(witness_path, **res.witness)
                print(f"  witness matrices dumped to {witness_path}")
    return EXIT_PROPERTY_FAILURE if failed else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lrkb",
        description="Low-rank approximated Kalman-Bucy filtering toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_config in (
        ("analyze", True), ("filter", True), ("montecarlo", True), ("verify", False),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=needs_config, help="scenario JSON path")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory")
        if name == "verify":
            p.add_argument("--only", default=None, help="run a single suite")
            p.add_argument("--tol-scale", type=float, default=1.0,
                           help="multiply suite tolerances (testing hook)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            out_dir = Path(args.out or "out")
            out_dir.mkdir(parents=True, exist_ok=True)
            seed = args.seed if args.seed is not None else 0
            try:
                return cmd_verify(args.only, seed, args.tol_scale, out_dir)
            except KeyError as exc:
                raise ConfigError(str(exc)) from exc
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        out_dir = Path(args.out or cfg.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        handler = {
            "analyze": cmd_analyze,
            "filter": cmd_filter,
            "montecarlo": cmd_montecarlo,
        }[args.command]
        return handler(cfg, out_dir)
    except (ConfigError, ValidationError) as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG_ERROR
    except (GapError, ConvergenceError, FrameError, np.linalg.LinAlgError, LrkbError) as exc:
        print(f"numeric failure: {exc}", file=_sys.stderr)
        return EXIT_NUMERIC_FAILURE


if __name__ == "__main__":
    raise SystemExit(main())
