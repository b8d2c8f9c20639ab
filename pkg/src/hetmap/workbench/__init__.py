"""Command line, file I/O, experiment harness and rendering."""

from .experiment import ExperimentConfig, ExperimentReport, Row, run_experiment
from .render import render_dot, render_gantt

__all__ = ["ExperimentConfig", "ExperimentReport", "Row", "run_experiment",
           "render_dot", "render_gantt"]
