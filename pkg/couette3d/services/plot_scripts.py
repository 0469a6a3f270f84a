import os
from pathlib import Path
from typing import Sequence

from jinja2 import Environment, FileSystemLoader, select_autoescape

from couette3d.core import get_logger

logger = get_logger(__name__)

TEMPLATES_DIR = Path(__file__).resolve().parent.parent / "templates"


class PlotScriptRenderer:
    """Renders gnuplot scripts for run CSVs from the Jinja2 templates in ``templates/plots``."""

    def __init__(self, templates_dir: str | Path = TEMPLATES_DIR):
        self.templates_dir = Path(templates_dir)
        self.env = Environment(
            loader=FileSystemLoader(str(self.templates_dir)),
            autoescape=select_autoescape([]),
            auto_reload=False,
            keep_trailing_newline=True,
        )

    def render(
        self,
        csv_name: str,
        columns: Sequence[str],
        run_id: str,
        kind: str,
        parameter_hash: str,
        x_column: str = "t",
        logscale: bool = False,
        template_type: str = "timeseries",
    ) -> str:
        template_name = f"plots/{template_type}.gp.j2"
        try:
            template = self.env.get_template(template_name)
        except Exception as e:
            raise ValueError(f"Template '{template_name}' not found. Error: {e}")

        stem = os.path.splitext(csv_name)[0]
        return template.render(
            csv_name=csv_name,
            stem=stem,
            columns=[c for c in columns if c != x_column],
            x_column=x_column,
            run_id=run_id,
            kind=kind,
            parameter_hash=parameter_hash,
            logscale=logscale,
        )

    def write(self, directory: str | Path, csv_name: str, columns: Sequence[str], **context) -> Path:
        """Render and write ``<stem>.gp`` next to the CSV."""
        script = self.render(csv_name, columns, **context)
        path = Path(directory) / (os.path.splitext(csv_name)[0] + ".gp")
        path.write_text(script, encoding="utf-8")
        logger.debug(f"Plot script written: {path.name}")
        return path
