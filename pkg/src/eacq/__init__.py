"""Rate regions, converse bounds and exact code simulation for
entanglement-assisted classical-quantum communication over erasure channels."""

__version__ = "0.1.0"
