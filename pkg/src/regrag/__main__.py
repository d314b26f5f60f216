"""Entry point for ``python -m regrag``."""

from regrag.cli import main

if __name__ == "__main__":
    main()
