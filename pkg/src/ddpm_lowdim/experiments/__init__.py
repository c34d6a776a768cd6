"""Sweeps, the validation suite and the command-line entry point."""
