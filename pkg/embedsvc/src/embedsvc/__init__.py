"""HTTP sidecar serving sentence-embedding and NLI inference."""

__version__ = "0.1.0"
