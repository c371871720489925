"""defectnets: permittivity estimation and defect shape reconstruction
networks trained on circumferential GPR datasets."""

__version__ = "0.1.0"
