"""Construction and verification toolkit for layered blow-up solutions of
forced 2D incompressible flow with variable density."""

__version__ = "0.1.0"
