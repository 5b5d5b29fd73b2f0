"""Experiment harness: data loading, experiment runs, result files and the CLI."""
