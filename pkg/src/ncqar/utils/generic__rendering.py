import typing

from rich.table import Table

__all__ = ("render_as_table", "Emoji", "winner_cell", "frequency_table", "identification_table", "binding_table")


class Emoji:
    """Emoji container."""

    CHECK_MARK = "\N{white heavy check mark}"
    CROSS = "\N{cross mark}"
    WARNING = "\N{warning sign}"
    INFO = "\N{information source}"


def render_as_table(headers: list[str], values: list[list], title: typing.Optional[str] = None) -> Table:
    """Renders a generic table."""
    table = Table(title=title)

    if values and len(values[0]) != len(headers):
        raise ValueError("Headers did not match the length of values.")

    for header in headers:
        table.add_column(header, justify="center", overflow="crop")

    for row in values:
        table.add_row(*map(str, row))

    return table


def winner_cell(winner: str, correct: typing.Optional[str] = None) -> str:
    colour = {"causal": "cyan", "noncausal": "magenta"}.get(winner, "yellow")
    cell = f"[{colour}]{winner}[/]"
    if correct is not None:
        cell += " " + (Emoji.CHECK_MARK if winner == correct else Emoji.CROSS)
    return cell


def frequency_table(rows: typing.Sequence[dict], title: str) -> Table:
    """Correct-selection frequencies, one row per quantile level plus the aggregate row."""
    table = Table(title=title)
    table.add_column("Quantile", justify="right")
    table.add_column("Frequency", justify="right")
    table.add_column("Std. error", justify="right")
    for row in rows:
        style = "bold" if row["quantile"] == "aggregate" else None
        table.add_row(row["quantile"], f"{row['frequency']:.3f}", f"{row['std_error']:.3f}", style=style)
    return table


def identification_table(cells: typing.Mapping[str, typing.Mapping[str, str]]) -> Table:
    """Winners per series at the reported quantile levels and in aggregate."""
    table = Table(title="SRAR identification")
    columns = list(next(iter(cells.values()))) if cells else []
    table.add_column("Series")
    for column in columns:
        table.add_column(column, justify="center")
    for name, row in cells.items():
        table.add_row(name, *(winner_cell(row[column]) for column in columns))
    return table


def binding_table(rows: typing.Sequence[dict], title: str) -> Table:
    table = Table(title=title)
    for header in ("True coefficient", "Mean estimate", "Dispersion", "Std. error", ""):
        table.add_column(header, justify="right")
    for row in rows:
        flag = Emoji.WARNING + " non-convergent" if row["non_convergent"] else ""
        table.add_row(
            f"{row['coefficient']:g}", f"{row['mean']:.4f}", f"{row['dispersion']:.4f}", f"{row['std_error']:.4f}", flag
        )
    return table
