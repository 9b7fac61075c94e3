"""Numeric services: operator algebra, states, generators, evolution and analyses."""
