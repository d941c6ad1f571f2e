import argparse
import itertools
import logging
import sys
from collections import defaultdict
from pathlib import Path
from typing import List, Optional

import numpy as np

from memno_lab import settings
from memno_lab.errors import ConfigError, MemnoError
from memno_lab.models import model_config
from memno_lab.models.instruments import ExperimentInstruments
from memno_lab.models.memno import MemNO, build_model
from memno_lab.models.training import evaluate, train
from memno_lab.modules import file, mori_zwanzig, rand, solvers, spectral, store
from memno_lab.types import EvalReport, TrainConfig

logger = logging.getLogger(__name__)

GLE_TOL = 1e-6
QUADRATURE_TOL = 1e-6
REFINEMENT_TOL = 1e-8
BAND_LIMITED_TOL = 1e-12

SIGNS = {"diffusive": mori_zwanzig.DIFFUSIVE, "anti-diffusive": mori_zwanzig.ANTI_DIFFUSIVE}


def _positive_int(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="memno", description="Memory neural operators and Mori-Zwanzig checks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="Solve a PDE family and write train/test containers")
    p.add_argument("--pde", choices=sorted(solvers.DEFAULTS), required=True)
    p.add_argument("--nu", type=float)
    p.add_argument("--train-n", type=_positive_int, required=True)
    p.add_argument("--test-n", type=_positive_int, required=True)
    p.add_argument("--resolution", type=int, help="Solver grid points per axis")
    p.add_argument("--seed", type=int, default=settings.DEFAULT_SEED)
    p.add_argument("--out", help="Output directory, a fresh run under MEMNO_BASE_DIR by default")
    p.add_argument("--end-time", type=float)
    p.add_argument("--nt", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--length", type=float)

    p = sub.add_parser("train", help="Train one model per (config, window, noise, resolution)")
    p.add_argument("--data", required=True, help="Training container")
    p.add_argument("--config", nargs="+", default=["SSTSS"], help="Preset names or layer strings")
    p.add_argument("--hidden", type=int)
    p.add_argument("--modes", type=int)
    p.add_argument("--state-dim", type=int)
    p.add_argument("--window", type=int, nargs="+", default=[0])
    p.add_argument("--reset-interval", type=int, default=0)
    p.add_argument("--noise-sigma", type=float, nargs="+", default=[0.0])
    p.add_argument("--multi-input-k", type=int, default=None)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--schedule", choices=["cosine", "step"], default="cosine")
    p.add_argument("--resolution", type=int, nargs="+", help="Observation resolutions, the stored one by default")
    p.add_argument("--seed", type=int, default=settings.DEFAULT_SEED)
    p.add_argument("--out", help="Run directory")

    p = sub.add_parser("eval", help="Roll out every checkpoint of a run on a test set")
    p.add_argument("--run", required=True)
    p.add_argument("--data", required=True, help="Test container")
    p.add_argument("--resolution", type=int, help="Only checkpoints bound to this resolution")
    p.add_argument("--noise-sigma", type=float, default=0.0, help="Input noise during rollout")
    p.add_argument("--start", type=int, help="Ground-truth states given, the largest input count by default")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--seed", type=int, default=settings.DEFAULT_SEED)

    p = sub.add_parser("mz-verify", help="Memory-gap theorem, lemmas and discrete GLE checks")
    p.add_argument("--B", type=float, nargs="+", default=[1.0, 2.0, 5.0, 10.0, 20.0])
    p.add_argument("--t", type=float, nargs="+", default=[0.25, 0.5, 1.0])
    p.add_argument("--a0", type=float, nargs=2, default=[1.0, 1.0])
    p.add_argument("--n-oracle", type=int, default=64)
    p.add_argument("--quad-steps", type=int, default=256)
    p.add_argument("--sign", choices=sorted(SIGNS), default="diffusive")
    p.add_argument("--norm", choices=["euclidean", "l2"], default="euclidean")
    p.add_argument("--gle-cases", type=int, default=20)
    p.add_argument("--seed", type=int, default=settings.DEFAULT_SEED)
    p.add_argument("--out", help="Output directory")

    p = sub.add_parser("omega", help="Unobserved energy fraction of stored datasets")
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--f", type=int, nargs="+", required=True)
    p.add_argument("--out", help="Output directory")

    p = sub.add_parser("compare", help="Per-timestep nRMSE differences of two eval.csv files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", help="Output directory")
    return parser


def _instruments(command: str, out: Optional[str], tag: Optional[str] = None) -> ExperimentInstruments:
    return ExperimentInstruments(rand.generate_run_id(command, tag), root=out)


# ------------------------------ commands ------------------------------


def cmd_generate(args) -> int:
    overrides = {
        key: value
        for key, value in (
            ("nu", args.nu),
            ("resolution", args.resolution),
            ("end_time", args.end_time),
            ("nt", args.nt),
            ("dt", args.dt),
            ("length", args.length),
        )
        if value is not None
    }
    spec = solvers.default_spec(args.pde, seed=args.seed, **overrides)

    with _instruments("generate", args.out, args.pde) as (instruments, metadata):
        metadata.update({"command": "generate", "flags": vars(args), "spec": spec.to_dict()})
        metadata["seeds"] = {"train": args.seed, "test": args.seed + 1}

        train_set = solvers.generate(spec, args.train_n, seed=args.seed, progress=True)
        test_set = solvers.generate(spec, args.test_n, seed=args.seed + 1, progress=True)
        store.write_dataset(train_set, instruments.dataset_file("train"))
        store.write_dataset(test_set, instruments.dataset_file("test"))

    print(f"✅ Generated {args.train_n}+{args.test_n} {args.pde} trajectories at f={spec.resolution}")
    print(f"📊 {instruments.root_dir}")
    return 0


def _model_config(name: str, args, window: int, dim: int):
    overrides = {"window": window, "dim": dim, "reset_interval": args.reset_interval}
    if args.hidden is not None:
        overrides.update(hidden=args.hidden, expanded=4 * args.hidden)
    if args.modes is not None:
        overrides["modes"] = args.modes
    if args.state_dim is not None:
        overrides["state_dim"] = args.state_dim
    if args.multi_input_k is not None:
        overrides["multi_input_k"] = args.multi_input_k
    return model_config.preset(name, **overrides)


def _run_name(config, window: int, sigma: float, resolution: int) -> str:
    name = config.layers
    if config.multi_input_k:
        name += f"_k{config.multi_input_k}"
    return f"{name}_w{window}_s{sigma:g}_f{resolution}"


def cmd_train(args) -> int:
    dataset = store.read_dataset(args.data)
    resolutions = args.resolution or [dataset.resolution]

    with _instruments("train", args.out) as (instruments, metadata):
        metadata.update({"command": "train", "flags": vars(args), "data_spec": dataset.spec.to_dict()})
        metadata["assumptions"] = {"optimizer": "adam(0.9, 0.999, 1e-8)", "clip_norm": 1.0}
        metadata["runs"] = []

        for name, window, sigma, f in itertools.product(args.config, args.window, args.noise_sigma, resolutions):
            observed = dataset if f == dataset.resolution else solvers.observe(dataset, f)
            config = _model_config(name, args, window, dataset.dim)
            cfg = TrainConfig(
                lr=args.lr,
                epochs=args.epochs,
                batch_size=args.batch_size,
                schedule=args.schedule,
                noise_sigma=sigma,
                seed=args.seed,
                window=window,
            )
            model = build_model(config, f, dataset.lengths, seed=args.seed)
            curve = train(model, observed, cfg, progress=True)

            run_name = _run_name(config, window, sigma, f)
            store.write_checkpoint(
                instruments.checkpoint_file(run_name),
                model.state_dict(),
                model_config.config_to_text(config),
                extra={
                    "resolution": f,
                    "lengths": dataset.lengths,
                    "window": window,
                    "noise_sigma": sigma,
                    "seed": args.seed,
                },
            )
            file.write_csv(instruments.loss_curve_file(run_name), curve.rows())
            metadata["runs"].append({"name": run_name, "final_nrmse": curve.train_nrmse[-1]})
            print(f"✅ {run_name}: train nRMSE {curve.train_nrmse[-1]:.4e}")

    print(f"📊 {instruments.root_dir}")
    return 0


def _load_checkpoint(path: Path):
    state, text, extra = store.read_checkpoint(path)
    config = model_config.config_from_text(text)
    resolution = int(extra["resolution"][0])
    model = MemNO(config, resolution, tuple(extra["lengths"]))
    model.load_state_dict(state)
    return model, extra


def cmd_eval(args) -> int:
    checkpoints = list(file.list_files(args.run, ".ckpt"))
    loaded = []
    for path in checkpoints:
        model, extra = _load_checkpoint(path)
        if args.resolution is None or model.resolution == args.resolution:
            loaded.append((path.stem, model, extra))
    if not loaded:
        raise ConfigError(f"no checkpoints to evaluate in {args.run}")

    test_set = store.read_dataset(args.data)
    start = args.start or max(model.config.input_steps for _, model, _ in loaded)

    instruments = ExperimentInstruments(Path(args.run).name, root=args.run, reset=False, metadata_name="eval_metadata.yml")
    with instruments as (instruments, metadata):
        metadata.update({"command": "eval", "flags": vars(args), "start": start})
        rows, summary = [], []
        for name, model, extra in loaded:
            observed = test_set if model.resolution == test_set.resolution else solvers.observe(test_set, model.resolution)
            window = int(extra["window"][0])
            cfg = TrainConfig(window=window, noise_sigma=args.noise_sigma, seed=args.seed, batch_size=args.batch_size)
            report = evaluate(model, observed, cfg, start=start, progress=True)
            common = {
                "config": name,
                "window": window,
                "noise_sigma": float(extra["noise_sigma"][0]),
                "resolution": model.resolution,
            }
            for t, value in zip(report.provenance["times"], report.per_step):
                rows.append({**common, "t": t, "nrmse": float(value)})
            summary.append({**common, "mean_nrmse": report.mean, "n_traj": report.n_traj, "start": start})
            print(f"✅ {name}: mean rollout nRMSE {report.mean:.4e}")

        file.write_csv(instruments.eval_file, rows, ["config", "window", "noise_sigma", "resolution", "t", "nrmse"])
        file.write_csv(instruments.eval_summary_file, summary)

    print(f"📊 {instruments.eval_file}")
    return 0


def cmd_mz_verify(args) -> int:
    sign = SIGNS[args.sign]
    failures: List[str] = []

    with _instruments("mz_verify", args.out) as (instruments, metadata):
        metadata.update({"command": "mz-verify", "flags": vars(args), "sign": sign})

        gap_rows, refinement_rows = [], []
        for B in args.B:
            report = mori_zwanzig.theorem_gap_report(B, args.a0, args.t, args.n_oracle, sign, norm=args.norm)
            for row in report.report_rows():
                projection = mori_zwanzig.memory_evolve_projection(B, args.a0, row["t"], args.n_oracle, sign)
                quadrature = mori_zwanzig.memory_evolve_quadrature(B, args.a0, row["t"], args.quad_steps, args.n_oracle, sign)
                row["quad_deviation"] = float(np.max(np.abs(projection - quadrature)) / np.max(np.abs(projection)))
                row["positive"] = bool(np.all(mori_zwanzig.full_evolve(B, args.a0, row["t"], args.n_oracle, sign) >= 0))
                gap_rows.append(row)
                if row["quad_deviation"] > QUADRATURE_TOL:
                    failures.append(f"quadrature deviation {row['quad_deviation']:.2e} at B={B}, t={row['t']}")
                if not row["positive"]:
                    failures.append(f"negative coefficient at B={B}, t={row['t']}")
                if row["norm_u2"] < row["norm_u1"]:
                    failures.append(f"memory does not dominate at B={B}, t={row['t']}")
            if not report.passed:
                failures.append(f"memory-gap floor not met at B={B}")

            op = mori_zwanzig.build_mixing_operator(B, args.n_oracle, sign)
            for t in args.t:
                change = mori_zwanzig.truncation_refinement(B, args.a0, t, args.n_oracle, sign)
                refinement_rows.append({
                    "B": B,
                    "t": t,
                    "n": args.n_oracle,
                    "rel_change_2n": change,
                    "dominant_eigenvalue": mori_zwanzig.dominant_eigenvalue(op),
                    "toeplitz_reference": mori_zwanzig.toeplitz_reference(B, args.n_oracle),
                })
                if t <= 1 and B <= 20 and change > REFINEMENT_TOL:
                    failures.append(f"truncation not converged at B={B}, t={t}: {change:.2e}")

        lemma_rows = []
        for B in [b for b in args.B if b > 0]:
            checks = [mori_zwanzig.lemma_l1_check(B, t) for t in args.t if t > 0]
            checks.append(mori_zwanzig.lemma_l2_check(B))
            for check in checks:
                lemma_rows.append({
                    "lemma": check.name,
                    "B": check.B,
                    "t": check.t,
                    "max_rel_diff": check.max_rel_diff,
                    "entries_ok": bool(np.all(check.entries_ok)),
                    "b_min": check.b_min,
                    "passed": check.passed,
                })
                if not check.passed:
                    failures.append(f"lemma {check.name} failed at B={check.B}, t={check.t}")

        gle_rows = mori_zwanzig.gle_suite(args.seed, n_cases=args.gle_cases)
        gle_rows += mori_zwanzig.gle_suite(args.seed + 1, n_cases=args.gle_cases, band_limited=True)
        for row in gle_rows:
            if row["rel_deviation"] > GLE_TOL:
                failures.append(f"GLE deviation {row['rel_deviation']:.2e} in case {row['case']}")
            if row["band_limited"] and max(row["abs_beta0"], row["eta0_abs"]) > BAND_LIMITED_TOL:
                failures.append(f"band-limited case {row['case']} has a nonzero residual")

        file.write_csv(instruments.mz_file("gap"), gap_rows)
        file.write_csv(instruments.mz_file("refinement"), refinement_rows)
        file.write_csv(instruments.mz_file("lemmas"), lemma_rows)
        file.write_csv(instruments.mz_file("gle"), gle_rows)
        metadata["failures"] = failures

    for failure in failures:
        print(f"❌ {failure}")
    print(f"📊 {instruments.root_dir}")
    if failures:
        return 2
    print("✅ Mori-Zwanzig checks passed")
    return 0


def cmd_omega(args) -> int:
    rows = []
    with _instruments("omega", args.out) as (instruments, metadata):
        metadata.update({"command": "omega", "flags": vars(args)})
        for path in args.data:
            ts = store.read_dataset(path)
            for f, (mean, std) in spectral.dataset_omega(ts, args.f).items():
                rows.append({"dataset": str(path), "f": f, "omega_mean": mean, "omega_std": std})
        file.write_csv(instruments.omega_file, rows, ["dataset", "f", "omega_mean", "omega_std"])
    print(f"✅ omega for {len(args.data)} datasets at {len(args.f)} resolutions")
    print(f"📊 {instruments.omega_file}")
    return 0


def _reports_from_csv(path) -> dict:
    """Groups eval.csv rows into one EvalReport per (config, window, noise_sigma, resolution)."""

    grouped = defaultdict(list)
    for row in file.read_csv(path):
        key = (row["config"], int(row["window"]), float(row["noise_sigma"]), int(row["resolution"]))
        grouped[key].append((float(row["t"]), float(row["nrmse"])))
    reports = {}
    for key, values in grouped.items():
        values.sort()
        per_step = np.array([v for _, v in values])
        reports[key] = EvalReport(per_step, float(per_step.mean()), 0, {"times": [t for t, _ in values]})
    return reports


def cmd_compare(args) -> int:
    a = _reports_from_csv(args.a)
    b = _reports_from_csv(args.b)
    common = sorted(set(a) & set(b))
    if not common:
        raise ConfigError(f"{args.a} and {args.b} share no (config, window, noise_sigma, resolution) rows")

    rows = []
    for key in common:
        difference = a[key].difference(b[key])
        for t, nrmse_a, nrmse_b, d in zip(a[key].provenance["times"], a[key].per_step, b[key].per_step, difference):
            config, window, sigma, resolution = key
            rows.append({
                "config": config,
                "window": window,
                "noise_sigma": sigma,
                "resolution": resolution,
                "t": t,
                "nrmse_a": nrmse_a,
                "nrmse_b": nrmse_b,
                "difference": float(d),
            })

    with _instruments("compare", args.out) as (instruments, metadata):
        metadata.update({"command": "compare", "flags": vars(args), "groups": len(common)})
        file.write_csv(instruments.compare_file, rows)
    print(f"✅ compared {len(common)} groups")
    print(f"📊 {instruments.compare_file}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point of the memno command line.

    Parses the subcommand, configures logging and runs the command. Errors
    raised by the package are reported with a ❌ line and mapped to exit
    codes: 1 for usage or configuration, 2 for numeric failures and 3 for
    container I/O.
    """

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1

    logging.basicConfig(level=settings.LOG_LEVEL, format="%(levelname)s : %(asctime)s : %(message)s")

    try:
        match args.command:
            case "generate":
                return cmd_generate(args)
            case "train":
                return cmd_train(args)
            case "eval":
                return cmd_eval(args)
            case "mz-verify":
                return cmd_mz_verify(args)
            case "omega":
                return cmd_omega(args)
            case "compare":
                return cmd_compare(args)
            case _:
                print(f"❌ unknown command {args.command}")
                return 1
    except MemnoError as e:
        print(f"❌ {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
