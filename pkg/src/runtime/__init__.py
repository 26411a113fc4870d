"""Runtime support: logging setup and worker pools."""
