"""holonomy-lab: geometric phases and holonomies, from Berry/Aharonov-Anandan
phases of driven quantum systems to classical parallel transport, Thomas
precession and Aharonov-Bohm loops."""

__version__ = "0.1.0"
