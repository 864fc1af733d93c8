"""Population initialization for evolutionary algorithms: random, opposition-based
learning (OBL), and OBL augmented with empty-space search (OBLESA)."""

__version__ = "0.1.0"
