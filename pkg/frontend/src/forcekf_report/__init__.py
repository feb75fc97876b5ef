"""Report renderer for estimator CSV outputs.

Consumes only the documented file formats (estimate.csv, groundtruth.csv,
nees.csv); it has no dependency on the estimator package itself.
"""

__version__ = "0.1.0"
