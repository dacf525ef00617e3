"""Week-ahead jam-factor forecasting with epsilon-SVR and an AMWR baseline."""

__version__ = "0.1.0"
