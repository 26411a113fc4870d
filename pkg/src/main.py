"""Main entry point for perplab."""

from .cli import main

if __name__ == "__main__":
    main()
