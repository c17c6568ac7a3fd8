"""implements the Workbench CLI"""

from pathlib import Path
from typing import List, Literal, Optional

from loguru import logger

from ._settings import settings
from .bounds import BoundReport, bound_report
from .engine import Engine, RunConfig
from .harness import (
    CellSpec,
    ExperimentSpec,
    aggregate,
    cell_seed,
    check_acceptance,
    emit,
    run_trials,
)
from .ingest import HetrecFiles, ingest
from .instance import InvalidInstanceError, ProblemInstance, load_instance, validate
from .results.bounds import BoundsFile
from .results.log import extend_log
from .results.trial import TrialRecord, read_records, write_records
from .schedule import parse_schedule
from .summary import (
    format_acceptance,
    format_aggregates,
    format_bound_report,
    render,
)


class Workbench:
    """simulate federated best arm identification and check it against theory"""

    def __init__(self, output_folder: str = settings.output_folder) -> None:
        super().__init__()
        self.output_folder = Path(output_folder)

    def validate(self, instance: str = "synthetic-gaussian"):
        """check the invariants of an instance (builtin name or file)"""
        problem = load_instance(instance)
        report = validate(problem)
        if report.ok:
            render(f"**{problem.name}**: ok")
        else:
            render(
                f"**{problem.name}**:\n\n"
                + "\n".join(f"- {v.message}" for v in report.violations)
            )
            raise InvalidInstanceError(report)

    def run(
        self,
        instance: str = "synthetic-gaussian",
        schedule: str = "exp:2",
        delta: float = 0.1,
        cost: float = 10.0,
        trials: int = settings.trials,
        seed: int = settings.seed,
        out: Optional[str] = None,
        trace: bool = False,
        format: Literal["csv", "json"] = "csv",
        workers: int = settings.workers,
    ):
        """run one cell of trials

        Args:
            instance: builtin name, instance text file or ingested instance JSON
            schedule: 'every', 'exp:<base>', 'periodic:<H>[:<offset>]' or 'superexp'
            delta: confidence parameter
            cost: uplink cost C
            trials: number of trials
            seed: master seed
            out: output folder (defaults to the workbench's output folder)
            trace: also write a per-trial trace CSV with every pull
            format: format of the aggregate table
            workers: number of worker processes
        """
        spec = ExperimentSpec(
            instance=instance,
            cells=[CellSpec(schedule=parse_schedule(schedule), cost=cost)],
            deltas=[delta],
            trials=trials,
            seed=seed,
        )
        problem = load_instance(instance)
        folder = self._folder(out)
        records = run_trials(spec, problem, workers=workers)
        bounds = [bound_report(problem, delta, cost)]
        self._write_results(folder, problem, records, bounds, format)
        if trace:
            config = RunConfig(
                delta=delta,
                cost=cost,
                sigma=spec.sigma,
                schedule=parse_schedule(schedule),
                max_steps=spec.max_steps,
                seed=cell_seed(seed, 0),
                trace_level="full",
            )
            for trial in range(trials):
                engine = Engine(problem, config, trial)
                _ = engine.run()
                assert engine.trace is not None
                engine.trace.to_csv(folder / f"trace_{trial}.csv")

            logger.info("wrote {} trace(s) to {}", trials, folder)

        extend_log(
            folder,
            "run",
            {
                "instance": problem.name,
                "schedule": schedule,
                "delta": delta,
                "cost": cost,
                "trials": trials,
                "seed": seed,
            },
        )

    def sweep(
        self,
        spec: str,
        out: Optional[str] = None,
        format: Literal["csv", "json"] = "csv",
        workers: int = settings.workers,
    ):
        """run all cells of an experiment file

        Args:
            spec: YAML experiment file
            out: output folder (defaults to the workbench's output folder)
            format: format of the aggregate table
            workers: number of worker processes
        """
        experiment = ExperimentSpec.from_yaml(spec)
        problem = load_instance(experiment.instance)
        folder = self._folder(out)
        records = run_trials(experiment, problem, workers=workers)
        bounds = [
            bound_report(problem, delta, experiment.cells[0].cost)
            for delta in experiment.deltas
        ]
        self._write_results(folder, problem, records, bounds, format)
        extend_log(folder, "sweep", experiment.model_dump(mode="json"))

    def bounds(
        self,
        instance: str = "synthetic-gaussian",
        delta: float = 0.01,
        cost: float = 10.0,
        period: Optional[int] = None,
        base: float = 2.0,
        out: Optional[str] = None,
    ) -> Optional[str]:
        """compute the bound report of an instance

        Args:
            instance: builtin name, instance text file or ingested instance JSON
            delta: confidence parameter
            cost: uplink cost C
            period: period of the periodic scheme row (defaults to round(H*))
            base: base of the exponential scheme row
            out: JSON output file; the JSON is returned if omitted
        """
        report = bound_report(load_instance(instance), delta, cost, period, base)
        render(format_bound_report(report))
        text = report.model_dump_json(indent=2)
        if out is None:
            return text

        _ = Path(out).write_text(text, encoding="utf-8")
        logger.info("wrote {}", out)

    def ingest(
        self,
        hetrec: Optional[str] = None,
        *hetrec_files: str,
        ratings: Optional[str] = None,
        out: str = "instance.json",
        name: str = "ingested",
    ):
        """build an empirical instance from ratings

        `ingest --hetrec <folder>` reads the standard hetrec file names,
        `ingest --hetrec <ratings> <countries> <genres>` the given files.

        Args:
            hetrec: hetrec folder, or the hetrec ratings file
            hetrec_files: the countries and genres files following the ratings file
            ratings: 'client,arm,rating' CSV file
            out: instance summary JSON (usable as instance source)
            name: instance name
        """
        if hetrec is None:
            if hetrec_files:
                raise ValueError(f"unexpected arguments {hetrec_files}")

            files = None
        elif not hetrec_files:
            files = HetrecFiles.from_folder(hetrec)
        elif len(hetrec_files) == 2:
            countries, genres = hetrec_files
            files = HetrecFiles(
                ratings=Path(hetrec), countries=Path(countries), genres=Path(genres)
            )
        else:
            given = (hetrec, *hetrec_files)
            raise ValueError(f"expected a folder or 3 hetrec files, got {given}")

        summary = ingest(ratings=ratings, hetrec=files, name=name)
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        _ = path.write_text(summary.model_dump_json(indent=2), encoding="utf-8")
        render(
            f"## Ingested '{name}'\n\n"
            + f"- arms ({summary.num_arms}): {', '.join(summary.arms)}\n"
            + f"- clients ({summary.num_clients}): {', '.join(summary.clients)}\n"
            + "".join(
                f"- removed client '{r.label}': {r.reason}\n"
                for r in summary.removed_clients
            )
        )
        extend_log(
            path.parent,
            "ingest",
            {"out": str(path), "removed": len(summary.removed_clients)},
        )

    def check(self, records: str, bounds: str, out: Optional[str] = None):
        """evaluate the acceptance criteria on trial records

        Args:
            records: records CSV written by `run` or `sweep`
            bounds: bounds JSON written by `run` or `sweep`
            out: output folder of acceptance.json (defaults to the records' folder)
        """
        report = check_acceptance(
            read_records(records), BoundsFile.load(bounds).reports
        )
        folder = Path(records).parent if out is None else self._folder(out)
        path = folder / report.file_name
        _ = path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
        render(format_acceptance(report))
        extend_log(folder, "check", {"status": report.status})
        if report.status == "fail":
            raise RuntimeError(f"acceptance check failed, see {path}")

    def _folder(self, out: Optional[str]) -> Path:
        folder = self.output_folder if out is None else Path(out)
        folder.mkdir(parents=True, exist_ok=True)
        return folder

    def _write_results(
        self,
        folder: Path,
        problem: ProblemInstance,
        records: List[TrialRecord],
        bounds: List[BoundReport],
        format: Literal["csv", "json"],
    ):
        write_records(records, folder / TrialRecord.file_name)
        _ = BoundsFile(reports=bounds).save(folder)
        aggregates = aggregate(records, bounds)
        _ = emit(aggregates, folder, format)
        render(format_aggregates(aggregates))
        logger.info("wrote results of '{}' to {}", problem.name, folder)
