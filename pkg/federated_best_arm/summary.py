"""markdown summaries of bound reports, aggregates and acceptance reports"""

from typing import Any, List, Optional, Sequence

from rich.console import Console
from rich.markdown import Markdown

from .bounds import BoundReport
from .results.acceptance import AcceptanceReport
from .results.trial import Aggregate

rich_console: Optional[Console] = None

STATUS_ICON = {"pass": "✔️", "fail": "❌", "not evaluated": "➖"}


def _table(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join("---" for _ in header) + "|",
    ]
    lines.extend("| " + " | ".join(map(_cell, row)) + " |" for row in rows)
    return "\n".join(lines)


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"

    return str(value)


def format_bound_report(report: BoundReport) -> str:
    t4 = report.doubling
    parts: List[str] = [
        f"## Bounds of '{report.instance}' (δ={report.delta:g}, C={report.cost:g})",
        _table(
            ["quantity", "value"],
            [
                ("T", report.t_total),
                ("pull bound (exp:2)", t4.pull_bound),
                ("communication bound (exp:2)", t4.comm_bound),
                ("total bound (exp:2)", t4.total_bound),
                ("C ln T_k ≤ T_k for all k", t4.precondition_ok),
                ("lower bound", report.lower_bound),
                ("lower bound (without factor 2)", report.lower_bound_statement),
                ("H*", report.h_star),
                ("λ*", report.lambda_star),
            ],
        ),
        "### Per arm",
        _table(
            ["arm", "T_k", "critical n (global)"]
            + [f"T_k,{m}" for m in range(1, report.num_clients + 1)],
            [
                (k, tk, crit, *row)
                for k, (tk, crit, row) in enumerate(
                    zip(report.t_k, report.critical_global, report.t_km), start=1
                )
            ],
        ),
        "### Schemes",
        _table(
            ["scheme", "pulls", "communication", "total"],
            [
                (s.scheme, s.pull_bound, s.comm_bound, s.total_bound)
                for s in report.schemes
            ],
        ),
    ]
    return "\n\n".join(parts)


def format_aggregates(aggregates: Sequence[Aggregate]) -> str:
    return "## Cells\n\n" + _table(
        [
            "instance",
            "schedule",
            "C",
            "δ",
            "trials",
            "total pulls",
            "comm cost",
            "total cost",
            "errors",
            "E rate",
            "violations",
        ],
        [
            (
                a.instance,
                a.schedule,
                a.cost,
                a.delta,
                a.trials,
                f"{a.total_pulls_mean:.6g} ± {a.total_pulls_std:.3g}",
                f"{a.comm_cost_mean:.6g} ± {a.comm_cost_std:.3g}",
                f"{a.total_cost_mean:.6g} ± {a.total_cost_std:.3g}",
                a.errors,
                a.event_E_rate,
                a.violations if a.bounds_checked else "-",
            )
            for a in aggregates
        ],
    )


def format_acceptance(report: AcceptanceReport) -> str:
    return f"## Acceptance: {report.status}\n\n" + _table(
        ["", "criterion", "scope", "detail"],
        [
            (STATUS_ICON[o.status], o.criterion, o.scope, o.detail)
            for o in report.outcomes
        ],
    )


def render(markdown: str):
    global rich_console
    if rich_console is None:
        rich_console = Console()

    rich_console.print(Markdown(markdown))
