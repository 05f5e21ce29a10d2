"""Online tracking with switching costs under correlated prediction noise."""

import json as _json

from ._soco import *  # noqa: F401,F403
from ._soco import run_experiment as _run_experiment


def run_config(config, threads=0):
    """Run an experiment described by a dict; returns (csv_text, summary_dict)."""
    csv, summary = _run_experiment(_json.dumps(config), threads)
    return csv, _json.loads(summary)
