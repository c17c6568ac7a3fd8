import argparse
from pathlib import Path
from typing import List, Sequence

from loguru import logger

from federated_best_arm import Workbench

EXPERIMENTS = Path(__file__).parent.parent / "experiments"


def reproduce(
    experiments: Sequence[Path], output_folder: Path, workers: int
) -> List[str]:
    """sweep and check each experiment file; returns the names of failed checks"""
    failed: List[str] = []
    for path in experiments:
        folder = output_folder / path.stem
        workbench = Workbench(output_folder=str(folder))
        workbench.sweep(str(path), workers=workers)
        try:
            workbench.check(str(folder / "records.csv"), str(folder / "bounds.json"))
        except RuntimeError as e:
            logger.error("{}: {}", path.stem, e)
            failed.append(path.stem)

    return failed


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    _ = parser.add_argument(
        "experiments",
        nargs="*",
        type=Path,
        default=sorted(EXPERIMENTS.glob("*.yaml")),
        help="experiment files (defaults to all files in experiments/)",
    )
    _ = parser.add_argument("--output", type=Path, default=Path("results"))
    _ = parser.add_argument("--workers", type=int, default=1)

    args = parser.parse_args()
    failed = reproduce(args.experiments, args.output, args.workers)
    if failed:
        raise SystemExit(f"acceptance checks failed: {', '.join(failed)}")
