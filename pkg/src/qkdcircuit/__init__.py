"""Circuit-level simulation of virtual QKD protocols, PGM noisy-processing analysis and key rates."""

__version__ = "0.1.0"
