"""Code-free data-analysis service built around a programmer/inspector agent
pair, a persistent execution kernel, and a key-value knowledge base."""

__version__ = "0.1.0"
