"""
Script to run a desk-scale comparison of sampling designs on a synthetic population.
"""

import logging
from pathlib import Path

from dotenv import load_dotenv

from bo_survey.config import load_config, output_dir_default
from bo_survey.report_generator import write_report
from bo_survey.simulation import run_simulation


def main():
    # Load environment variables
    load_dotenv()
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')

    config = load_config(overrides={
        "repeats": 20,
        "designs": "srs,bo-pu,bo-ilcb,bo-ei,bo-sei",
        "master_seed": 7,
    })

    try:
        report = run_simulation(config)
        paths = write_report(report, Path(output_dir_default()), pdf=True)
    except Exception as e:
        print(f"Error running simulation: {e}")
        return

    print("\nMedian metric values:")
    print("-" * 50)
    for design, metrics in report.summaries.items():
        medians = ", ".join(f"{name}={summary.median:.4g}" for name, summary in metrics.items())
        print(f"{design}: {medians}")
    print("\nMann-Whitney p-values against SRS:")
    for design, p_values in report.mwu.items():
        print(f"{design}: " + ", ".join(f"{name}={p:.3g}" for name, p in p_values.items()))
    print("\nResult files:")
    for path in paths:
        print(f"- {path}")


if __name__ == "__main__":
    main()
