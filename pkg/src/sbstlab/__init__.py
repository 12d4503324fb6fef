"""Search-based software testing lab.

Generates benchmark programs with grammatical evolution and compares genetic
algorithm test-data generation against random testing.
"""

__version__ = "0.1.0"
