"""spoqclab: honeycomb Floquet vs surface code memories on spin-optical hardware."""

__version__ = "0.1.0"
