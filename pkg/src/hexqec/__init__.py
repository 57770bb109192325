"""Surface-code memories on heavy-hex lattices: layout, circuits, noise,
sampling, decoding and entanglement-fidelity analysis."""

__version__ = "0.1.0"
