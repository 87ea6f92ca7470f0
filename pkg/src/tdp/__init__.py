"""Certificate-less pairing, receipt-based trust and an adversarial D2D simulator."""

__version__ = "0.1.0"
