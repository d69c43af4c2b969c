"""radioimg: RF imaging over distributed MIMO arrays — near-field channel
simulation, range-migration and sparse-Bayesian reconstruction, metrics."""

from . import (channel, config, experiment, geometry, kernels, metrics, rma,
               sbl, serialization, waveform)

__all__ = ["channel", "config", "experiment", "geometry", "kernels", "metrics",
           "rma", "sbl", "serialization", "waveform"]

__version__ = "0.1.0"
