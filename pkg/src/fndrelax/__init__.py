"""NV T1 relaxometry toolkit for catalytic radical generation in silica-shelled nanodiamonds."""

__version__ = "0.1.0"
