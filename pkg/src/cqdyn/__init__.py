"""cqdyn - Completely positive classical-quantum hybrid dynamics toolkit."""

__version__ = "0.1.0"
