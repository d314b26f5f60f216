"""Hybrid lexical+semantic passage retrieval and RAG toolkit for regulatory corpora."""

__version__ = "0.1.0"
