"""Digital twin of a kinetic-inductance two-mode-squeezing source and its ON/OFF g² readout."""

__version__ = "0.1.0"
