"""Performance model for concurrent GEMM and collective execution on one GPU node."""

__version__ = "0.1.0"
