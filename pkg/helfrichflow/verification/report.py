import logging
from collections import Counter

from rich.console import Console
from rich.table import Table

from helfrichflow.verification.suites import CheckResult

logger = logging.getLogger(__name__)


def all_passed(results: list[CheckResult]) -> bool:
    return bool(results) and all(r.passed for r in results)


def results_table(results: list[CheckResult]) -> Table:
    table = Table(title="Verification Results")
    table.add_column("Suite", justify="left", style="cyan")
    table.add_column("Check", justify="left")
    table.add_column("Result", justify="center")
    table.add_column("Value", justify="right")
    table.add_column("Tolerance", justify="right")
    for r in results:
        table.add_row(
            r.suite,
            r.name,
            "[green]PASS[/green]" if r.passed else "[red]FAIL[/red]",
            f"{r.value:.3e}",
            f"{r.tolerance:.1e}",
        )
    return table


def print_results(results: list[CheckResult], console: Console | None = None):
    console = console or Console()
    console.print(results_table(results))
    failed = [r for r in results if not r.passed]
    if failed:
        console.print(f"[red]{len(failed)} of {len(results)} checks failed[/red]")
    else:
        console.print(f"[green]All {len(results)} checks passed[/green]")


def summary(results: list[CheckResult]) -> dict:
    """JSON-ready summary with per-suite pass counts."""
    totals = Counter(r.suite for r in results)
    passed = Counter(r.suite for r in results if r.passed)
    return {
        "passed": all_passed(results),
        "suites": {
            suite: {"checks": totals[suite], "passed": passed[suite]}
            for suite in totals
        },
        "checks": [r.to_dict() for r in results],
    }
