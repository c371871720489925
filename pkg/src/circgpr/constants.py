"""Physical constants shared across the toolkit (SI units)."""

C0 = 2.99792458e8       # speed of light in vacuum [m/s]
EPS0 = 8.8541878128e-12  # vacuum permittivity [F/m]
MU0 = 1.25663706212e-6   # vacuum permeability [H/m]
ETA0 = 376.730313668     # impedance of free space [ohm]
