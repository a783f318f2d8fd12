"""HTTP sidecar exposing zero-shot NLI scoring over a fixed wire protocol."""

__version__ = "0.1.0"
