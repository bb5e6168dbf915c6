"""Video anomaly detection: per-frame CNN features fed to a GRU/LSTM classifier."""

__version__ = "0.1.0"
