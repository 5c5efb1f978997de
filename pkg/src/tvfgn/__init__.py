"""Early-warning detection of rising autocorrelation in long-memory series.

Models a time series as a time-weighted mixture of two fractional Gaussian
noise processes, fits it with a sparse latent-Gaussian engine, and reports
the posterior evidence that the memory parameter increased, alongside
classical sliding-window indicators.
"""

__version__ = "0.1.0"
