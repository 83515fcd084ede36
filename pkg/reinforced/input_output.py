"""Console output and logging setup for the reinforced CLI."""

import logging
from typing import Any, Dict, Optional, Sequence

from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

LOGGER_NAME = "reinforced"


def setup_logging(level: int = logging.WARNING, no_color: bool = False) -> logging.Logger:
    """Install a single RichHandler on the package logger."""
    logger = logging.getLogger(LOGGER_NAME)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    console = Console(stderr=True, color_system=None if no_color else "auto")
    handler = RichHandler(console=console, show_path=False, rich_tracebacks=True, markup=False)
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.setLevel(level)
    logger.propagate = False
    return logger


def log_level(debug: bool = False, verbose: bool = False) -> int:
    if debug:
        return logging.DEBUG
    if verbose:
        return logging.INFO
    return logging.WARNING


class InputOutput:
    """Handles output for the reinforced CLI."""

    def __init__(self, pretty: bool = True, no_color: bool = False, console: Optional[Console] = None):
        self.pretty = pretty and not no_color
        self.console = console or Console(color_system="truecolor" if self.pretty else None)

    def display_error(self, message: str, hint: Optional[str] = None) -> None:
        text = message if not hint else f"{message}\n\n{hint}"
        if self.pretty:
            panel = Panel(
                text,
                title="[bold red]Error[/bold red]",
                border_style="red",
                padding=(1, 2),
            )
            self.console.print(panel)
        else:
            self.console.print(f"ERROR: {text}")

    def display_line(self, message: str) -> None:
        """Plain one-line result, e.g. a verdict; never wrapped in a panel."""
        self.console.print(message, markup=False, highlight=False)

    def display_table(self, title: str, columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
        table = Table(title=title if self.pretty else None, show_lines=False)
        for col in columns:
            table.add_column(col, justify="right")
        for row in rows:
            table.add_row(*(format_cell(v) for v in row))
        if not self.pretty:
            self.console.print(f"--- {title} ---")
        self.console.print(table)

    def display_outputs(self, paths: Dict[str, str]) -> None:
        lines = "\n".join(f"{name}: [dim]{path}[/dim]" for name, path in paths.items())
        if self.pretty:
            self.console.print(
                Panel(lines, title="[bold green]Written[/bold green]", border_style="green", padding=(1, 2))
            )
        else:
            for name, path in paths.items():
                self.console.print(f"{name}: {path}")


def format_cell(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)
