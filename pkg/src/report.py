"""Plain-text reports and SVG overlays rendered with jinja2."""
import logging
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from jinja2 import Environment, FileSystemLoader

from artifacts import dump_record
from density import GridDensity

logger = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).parent / 'templates'
PALETTE = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e', '#8c564b']


@dataclass(frozen=True)
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]


@dataclass(frozen=True)
class PlotArea:
    left: float = 60.0
    top: float = 30.0
    right: float = 620.0
    bottom: float = 350.0

    @property
    def width(self) -> float:
        return self.right - self.left

    @property
    def height(self) -> float:
        return self.bottom - self.top


def density_series(label: str, density: GridDensity) -> Series:
    return Series(label, density.grid.centers, density.values)


class ReportGenerator:
    """Writes timestamped reports and SVG overlays into an output directory."""

    def __init__(self, output_dir: Union[str, Path],
                 template_dir: Union[str, Path] = TEMPLATE_DIR):
        self.output_dir = Path(output_dir)
        self.env = Environment(loader=FileSystemLoader(str(template_dir)), autoescape=False)
        self.env.filters['number'] = self._format_number

    @staticmethod
    def _format_number(value: float) -> str:
        return f"{value:.4g}"

    def _path(self, name: str) -> Path:
        path = self.output_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def write_report(self, name: str, record: Dict[str, Any],
                     generated: Optional[datetime] = None) -> Path:
        """YAML body under one ``# generated:`` line, the only line that varies between runs."""
        generated = generated or datetime.now()
        text = self.env.get_template('report.txt.j2').render(
            generated=generated.isoformat(timespec='seconds'),
            body=dump_record(record),
        )
        path = self._path(name)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
        logger.info(f"Wrote report {path}")
        return path

    def render_overlay(self, title: str, series: List[Series], x_label: str = '') -> str:
        plot = PlotArea()
        abscissae = [np.asarray(s.x, dtype=float) for s in series]
        values = [np.asarray(s.y, dtype=float) for s in series]
        xs = np.concatenate(abscissae)
        ys = np.concatenate(values)
        ys = ys[np.isfinite(ys)]
        x_lo, x_hi = float(np.min(xs)), float(np.max(xs))
        if ys.size:
            y_lo, y_hi = min(0.0, float(np.min(ys))), float(np.max(ys))
        else:
            y_lo, y_hi = 0.0, 1.0
        x_hi = x_hi if x_hi > x_lo else x_lo + 1.0
        y_hi = y_hi if y_hi > y_lo else y_lo + 1.0

        lines = []
        for index, (x, y) in enumerate(zip(abscissae, values)):
            keep = np.isfinite(y)
            px = plot.left + (x[keep] - x_lo) / (x_hi - x_lo) * plot.width
            py = plot.bottom - (y[keep] - y_lo) / (y_hi - y_lo) * plot.height
            lines.append({
                'label': series[index].label,
                'color': PALETTE[index % len(PALETTE)],
                'points': ' '.join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py)),
            })
        return self.env.get_template('overlay.svg.j2').render(
            width=640, height=400, title=title, plot=plot, series=lines,
            x_range=(x_lo, x_hi), y_range=(y_lo, y_hi), x_label=x_label,
        )

    def write_overlay(self, name: str, title: str, series: List[Series],
                      x_label: str = '') -> Path:
        path = self._path(name)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(self.render_overlay(title, series, x_label))
        logger.info(f"Wrote plot {path}")
        return path
