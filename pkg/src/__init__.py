"""kzpadic: p-adic KZ solutions, hyperelliptic crystals and local flat sections."""
__version__ = "0.1.0"
