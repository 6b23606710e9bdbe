"""predbench: a desk-scale benchmark suite for neural-architecture
performance predictors."""

__version__ = "0.1.0"
