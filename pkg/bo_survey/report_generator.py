"""
Module for writing simulation results: the records table, the JSON summary
and an optional PDF summary report.
"""

import json
from pathlib import Path
from typing import Dict, List

from reportlab.lib import colors
from reportlab.lib.enums import TA_CENTER
from reportlab.lib.pagesizes import letter
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from .models import METRIC_NAMES, FiveNumberSummary, SimulationReport
from .simulation import records_frame

RECORDS_FILE = "records.csv"
SUMMARY_FILE = "summary.json"
PDF_FILE = "summary.pdf"

METRIC_TITLES = {
    "mean_abs_diff": "Absolute difference of population means",
    "kl_divergence": "KL divergence of population distributions",
    "total_abs_diff": "Absolute difference of totals (difference estimator)",
    "total_abs_diff_normalized_pi": "Absolute difference of totals (normalized inclusion probabilities)",
}

TABLE_STYLE = TableStyle([
    ('ALIGN', (1, 0), (-1, -1), 'RIGHT'),
    ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
    ('FONTSIZE', (0, 0), (-1, -1), 9),
    ('BOTTOMPADDING', (0, 0), (-1, -1), 6),
    ('BACKGROUND', (0, 0), (-1, 0), colors.grey),
    ('TEXTCOLOR', (0, 0), (-1, 0), colors.whitesmoke),
])


def write_records(report: SimulationReport, output_dir: Path) -> Path:
    """Write one CSV row per (design, repeat)."""
    path = Path(output_dir) / RECORDS_FILE
    records_frame(report.records).to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return path


def write_summary(report: SimulationReport, output_dir: Path) -> Path:
    """Write summaries, p-values and provenance as JSON."""
    path = Path(output_dir) / SUMMARY_FILE
    with open(path, 'w') as f:
        json.dump(report.model_dump_summary(), f, indent=2)
        f.write("\n")
    return path


class SummaryReportGenerator:
    """Generates a PDF summary of a simulation run."""

    def __init__(self, output_dir: str = "results"):
        """Initialize the report generator."""
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.styles = getSampleStyleSheet()

        self.styles.add(ParagraphStyle(
            name='ReportTitle',
            parent=self.styles['Heading1'],
            fontSize=20,
            spaceAfter=24,
            alignment=TA_CENTER
        ))

        self.styles.add(ParagraphStyle(
            name='ReportSubtitle',
            parent=self.styles['Heading2'],
            fontSize=13,
            spaceAfter=12
        ))

        self.styles.add(ParagraphStyle(
            name='ReportBody',
            parent=self.styles['Normal'],
            fontSize=10,
            spaceAfter=8
        ))

    def _create_header(self, report: SimulationReport) -> list:
        """Create the title and provenance block."""
        elements = [Paragraph("Sampling Design Simulation Summary", self.styles['ReportTitle'])]
        provenance = report.provenance
        header_data = [
            ["Config hash:", provenance.config_hash[:16]],
            ["Master seed:", str(provenance.master_seed)],
            ["Version:", provenance.version],
            ["Generated at:", provenance.created_at],
            ["Records:", str(len(report.records))],
            ["Failed repeats:", str(len(report.failed_repeats))],
        ]
        header_table = Table(header_data, colWidths=[1.6 * inch, 4.4 * inch])
        header_table.setStyle(TableStyle([
            ('ALIGN', (0, 0), (-1, -1), 'LEFT'),
            ('FONTNAME', (0, 0), (0, -1), 'Helvetica-Bold'),
            ('FONTSIZE', (0, 0), (-1, -1), 10),
        ]))
        elements.append(header_table)
        if report.degraded:
            elements.append(Paragraph("This run is degraded: too many repeats failed.", self.styles['ReportBody']))
        elements.append(Spacer(1, 16))
        return elements

    def _create_metric_table(self, metric: str, summaries: Dict[str, Dict[str, FiveNumberSummary]]) -> list:
        """Create the five-number table of one metric."""
        elements = [Paragraph(METRIC_TITLES[metric], self.styles['ReportSubtitle'])]
        rows: List[List[str]] = [["Design", "Min", "Q1", "Median", "Q3", "Max"]]
        for design, metrics in summaries.items():
            s = metrics[metric]
            rows.append([design] + [f"{value:.4g}" for value in (s.minimum, s.q1, s.median, s.q3, s.maximum)])
        table = Table(rows)
        table.setStyle(TABLE_STYLE)
        elements.append(table)
        elements.append(Spacer(1, 12))
        return elements

    def _create_p_value_table(self, mwu: Dict[str, Dict[str, float]]) -> list:
        """Create the metric by design matrix of Mann-Whitney p-values."""
        elements = [Paragraph("Mann-Whitney U p-values against SRS", self.styles['ReportSubtitle'])]
        if not mwu:
            elements.append(Paragraph("No designs to compare", self.styles['ReportBody']))
            return elements
        designs = list(mwu)
        rows = [["Metric"] + designs]
        for metric in METRIC_NAMES:
            rows.append([metric] + [f"{mwu[design][metric]:.3e}" for design in designs])
        table = Table(rows)
        table.setStyle(TABLE_STYLE)
        elements.append(table)
        return elements

    def generate_report(self, report: SimulationReport) -> Path:
        """Generate the PDF summary and return its path."""
        filename = self.output_dir / PDF_FILE
        doc = SimpleDocTemplate(
            str(filename),
            pagesize=letter,
            rightMargin=54,
            leftMargin=54,
            topMargin=54,
            bottomMargin=54
        )

        elements = []
        elements.extend(self._create_header(report))
        for metric in METRIC_NAMES:
            if report.summaries:
                elements.extend(self._create_metric_table(metric, report.summaries))
        elements.extend(self._create_p_value_table(report.mwu))

        doc.build(elements)
        return filename


def write_report(report: SimulationReport, output_dir: Path, pdf: bool = False) -> List[Path]:
    """Write all result files for a run and return their paths."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    paths = [write_records(report, output_dir), write_summary(report, output_dir)]
    if pdf:
        paths.append(SummaryReportGenerator(str(output_dir)).generate_report(report))
    return paths
