"""Poissonian city laboratory.

Poisson line networks, semi-perimeter routes between two points, the growth
process and subordinators behind their excess length, traffic flow through the
centre of a disk, and the Manhattan grid comparison.
"""

__version__ = "0.1.0"
