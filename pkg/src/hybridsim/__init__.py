"""Hybrid LLM-agent / agent-based opinion-dynamics simulator."""

__version__ = "0.1.0"
