"""Matrix-valued Allen-Cahn flows on the periodic unit square."""
__version__ = "0.1.0"
