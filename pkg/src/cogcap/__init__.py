"""Secondary-user capacity under limited channel knowledge in a two-user
cognitive radio spectrum-sharing system."""

__version__ = "0.1.0"
