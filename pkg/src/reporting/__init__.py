"""Artifact generators: regression and Granger tables, plot-ready CSV files."""
