"""Command line front-end for frequency-bin simulations.

Every command writes data files (CSV or JSON) to the output directory;
CSV files start with a comment line holding the configuration hash
and seed. Exit codes: 0 ok, 2 usage, 3 data, 4 capacity, 5 numerical.
"""
import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from QFP.Config import RunConfig, SchemaError, load_config
from QFP.core.lattice import ModeRangeError
from QFP.Experiment import (
    ExperimentSetup,
    batch_bases,
    run_batch,
    simulate_basis_counts,
    simulate_jsi,
    simulate_pair_expectations,
    simulate_tomography_record,
)
from QFP.Gates import (
    FidelityError,
    LayoutError,
    TruncationError,
    build_gate,
    tunability_sweep,
)
from QFP.Measurement import ValidationError, load_record, save_record
from QFP.Network import (
    CapacityError,
    PlanGraph,
    allocate,
    usable_pairs,
    validate_guard_layout,
)
from QFP.QKD import (
    NoKeyError,
    QberError,
    evaluate_link,
    read_basis_counts,
    read_link_metrics,
    write_basis_counts,
    write_link_metrics,
)
from QFP.Resonator import DegenerateStateError
from QFP.Tables import Table, write_table_to_csv
from QFP.Tomography import ReconstructionError, TomographySet, tomography_report


EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CAPACITY = 4
EXIT_NUMERICAL = 5

# Checked in order, subclasses of ValueError first
EXIT_CODES = (
    (SchemaError, EXIT_USAGE),
    (CapacityError, EXIT_CAPACITY),
    ((TruncationError, FidelityError, ReconstructionError, QberError), EXIT_NUMERICAL),
    (
        (
            ModeRangeError,
            DegenerateStateError,
            LayoutError,
            ValidationError,
            NoKeyError,
            FileNotFoundError,
        ),
        EXIT_DATA,
    ),
)


class Run:
    """Resolved configuration, seed and output location of a command."""

    def __init__(self, args):
        self.config: RunConfig = load_config(args.config, args.set or ())
        self.seed: int = args.seed if args.seed is not None else self.config.seed
        self.out = Path(args.out or self.config.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)

    @property
    def metadata(self):
        return {"config_hash": self.config.hash, "seed": self.seed}

    def path(self, name: str) -> Path:
        return self.out / name

    def write_json(self, name: str, doc) -> Path:
        path = self.path(name)
        with open(path, "w") as outfile:
            json.dump({**self.metadata, **doc}, outfile, indent=2)
            outfile.write("\n")
        logging.info("Wrote %s", path)
        return path

    def write_csv(self, name: str, table: Table) -> Path:
        path = self.path(name)
        write_table_to_csv(table, path, self.metadata)
        logging.info("Wrote %s", path)
        return path


def parse_alphas(text: str) -> List[float]:
    """Comma-separated step heights, ``pi`` accepted as a factor."""
    values = []
    for item in text.split(","):
        item = item.strip().lower()
        if not item:
            continue
        if item.endswith("pi"):
            factor = item[:-2].rstrip("*") or "1"
            values.append(float(factor) * math.pi)
        else:
            values.append(float(item))
    return values


def cmd_characterize_gate(args) -> int:
    run = Run(args)
    gate = run.config.gate
    if args.alphas is not None:
        try:
            alphas = parse_alphas(args.alphas)
        except ValueError as err:
            raise SchemaError(f"Invalid step heights: {args.alphas}") from err
    else:
        steps = args.steps
        alphas = [math.pi * k / (steps - 1) for k in range(steps)] if steps > 1 else [0.0] * steps

    config = build_gate(args.base, gate.alpha, **gate.gate_kwargs())
    points = tunability_sweep(config, alphas, args.base)

    table = Table(columns=["alpha_rad", "f_identity", "f_hadamard", "p_success"])
    for point in points:
        table.append_row(list(point))
    run.write_csv("gate_sweep.csv", table)
    return EXIT_OK


def cmd_simulate_jsi(args) -> int:
    run = Run(args)
    setup = ExperimentSetup.from_config(run.config)
    run.write_csv("jsi.csv", simulate_jsi(setup, run.seed))
    return EXIT_OK


def _bases(config: RunConfig) -> List[int]:
    network = config.network
    return batch_bases(
        network.first_index,
        network.pairs,
        config.gate.guard_modes,
        config.resonator.n_max,
    )


def cmd_tomography(args) -> int:
    run = Run(args)
    anchor = args.anchor or run.config.tomography.anchor
    resamples = run.config.tomography.resamples if args.resamples is None else args.resamples

    def report_for(counts, seed):
        return tomography_report(counts, anchor, resamples or None, seed)

    if args.batch:
        setup = ExperimentSetup.from_config(run.config)
        records = run_batch(setup, _bases(run.config), run.seed, simulate_tomography_record)
        reports = []
        table = Table(columns=["n", "fidelity", "fidelity_std", "purity"])
        for n, record in records:
            report = {"n": n, **report_for(TomographySet(record), record.seed)}
            reports.append(report)
            table.append_row(
                [n, report["fidelity"], report["fidelity_std"], report["rho"]["purity"]]
            )
        run.write_json("tomography_batch.json", {"anchor": anchor, "reports": reports})
        run.write_csv("tomography_batch.csv", table)
        return EXIT_OK

    if args.simulate is not None:
        setup = ExperimentSetup.from_config(run.config)
        n = args.simulate
        if args.noiseless:
            counts = simulate_pair_expectations(setup, n)
            report = tomography_report(counts, anchor)
            source = f"expected counts at n={n}"
        else:
            record = simulate_tomography_record(setup, n, run.seed)
            save_record(record, run.path(f"coincidences_n{n}.json"), run.metadata)
            report = report_for(TomographySet(record), run.seed)
            source = f"simulated counts at n={n}"
    elif args.input:
        record = load_record(args.input)
        report = report_for(TomographySet(record), run.seed)
        source = str(args.input)
    else:
        raise SchemaError("Give a counts file, --simulate N or --batch")

    logging.info("Fidelity %.4f from %s", report["fidelity"], source)
    run.write_json("tomography.json", {"source": source, "anchor": anchor, **report})
    return EXIT_OK


def _link_metrics(run: Run, args):
    qkd = run.config.qkd
    threshold = qkd.threshold if args.threshold is None else args.threshold

    if args.input:
        pairs = read_basis_counts(args.input)
    else:
        setup = ExperimentSetup.from_config(run.config, tau_s=qkd.tau_s)
        pairs = run_batch(setup, _bases(run.config), run.seed, simulate_basis_counts)
        write_basis_counts(pairs, run.path("basis_counts.csv"), run.metadata)

    metrics = [
        evaluate_link(
            counts, n, threshold, qkd.sifting_factor, qkd.ec_efficiency, allow_no_key=True
        )
        for n, counts in pairs
    ]
    write_link_metrics(metrics, run.path("qkd.csv"), run.metadata)
    logging.info("%d of %d pairs are secure", sum(m.secure for m in metrics), len(metrics))
    return metrics


def cmd_qkd(args) -> int:
    run = Run(args)
    _link_metrics(run, args)
    return EXIT_OK


def cmd_plan_network(args) -> int:
    run = Run(args)
    if args.metrics:
        guard_modes = run.config.gate.guard_modes
        validate_guard_layout(_bases(run.config), guard_modes)
        metrics = read_link_metrics(args.metrics)
        validate_guard_layout([m.n for m in metrics], guard_modes)
    else:
        metrics = _link_metrics(run, args)

    users = run.config.network.users if args.users is None else args.users
    policy = args.policy or run.config.network.policy
    rates = {m.n: m.sifted_rate for m in metrics}
    plan = allocate(usable_pairs(metrics), users, rates, policy)

    run.write_json("plan.json", plan.to_dict())
    if args.graph:
        path = PlanGraph(plan).save(run.path("plan.gv"))
        logging.info("Wrote %s", path)
    return EXIT_OK


def common_arguments() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", help="Configuration file path")
    parser.add_argument("--seed", type=int, help="Random seed, overrides config")
    parser.add_argument("--out", help="Output directory, overrides config")
    parser.add_argument(
        "--set",
        action="append",
        metavar="PATH=VALUE",
        help="Override a configuration value, e.g. gate.alpha=1.57",
    )
    parser.add_argument(
        "-v", "--verbose", help="Be more talkative", action="store_true"
    )
    return parser


def create_parser() -> argparse.ArgumentParser:
    common = common_arguments()
    parser = argparse.ArgumentParser(
        prog="qfp",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    gate = commands.add_parser(
        "characterize-gate",
        parents=[common],
        help="Fidelity and success probability over filter step heights",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    gate.add_argument("--alphas", help="Comma-separated step heights, e.g. 0,0.5pi,pi")
    gate.add_argument("--steps", type=int, default=32, help="Number of steps over [0, pi]")
    gate.add_argument("--base", type=int, default=0, help="Mode index of logical |0>")
    gate.set_defaults(func=cmd_characterize_gate)

    jsi = commands.add_parser(
        "simulate-jsi", parents=[common], help="Pair rate and counts per index"
    )
    jsi.set_defaults(func=cmd_simulate_jsi)

    tomography = commands.add_parser(
        "tomography", parents=[common], help="Reconstruct a two-qubit state"
    )
    tomography.add_argument("input", nargs="?", help="Coincidence record, JSON or CSV")
    mode = tomography.add_mutually_exclusive_group()
    mode.add_argument("--simulate", type=int, metavar="N", help="Simulate pair N")
    mode.add_argument("--batch", action="store_true", help="Simulate every accessible pair")
    tomography.add_argument("--noiseless", action="store_true", help="Use expected counts")
    tomography.add_argument("--anchor", choices=("context", "flux"))
    tomography.add_argument("--resamples", type=int, help="Monte-Carlo resamples, 0 to skip")
    tomography.set_defaults(func=cmd_tomography)

    qkd = commands.add_parser("qkd", parents=[common], help="Key metrics per pair")
    qkd.add_argument("input", nargs="?", help="Basis counts CSV, simulated if omitted")
    qkd.add_argument("--threshold", type=float, help="QBER security threshold")
    qkd.set_defaults(func=cmd_qkd)

    plan = commands.add_parser(
        "plan-network", parents=[common], help="Assign secure pairs to user links"
    )
    plan.add_argument("--metrics", help="Key metrics CSV written by the qkd command")
    plan.add_argument("--input", help="Basis counts CSV, simulated if omitted")
    plan.add_argument("--users", type=int, help="Number of users")
    plan.add_argument("--policy", choices=("ordered", "balanced"))
    plan.add_argument("--threshold", type=float, help="QBER security threshold")
    plan.add_argument("--graph", action="store_true", help="Also write plan.gv")
    plan.set_defaults(func=cmd_plan_network)

    return parser


def exit_code(err: Exception) -> Optional[int]:
    for types, code in EXIT_CODES:
        if isinstance(err, types):
            return code
    return None


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or EXIT_OK)

    log_level = logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(
        stream=sys.stderr,
        level=log_level,
        format="%(asctime)s %(levelname)-8s %(message)s",
    )

    try:
        return args.func(args)
    except Exception as err:  # pylint: disable=broad-except
        code = exit_code(err)
        if code is None:
            raise
        logging.error("%s: %s", type(err).__name__, err)
        return code


if __name__ == "__main__":
    sys.exit(main())
