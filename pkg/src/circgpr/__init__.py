"""circgpr: circumferential GPR simulation, migration and autofocusing toolkit."""

__version__ = "0.1.0"
