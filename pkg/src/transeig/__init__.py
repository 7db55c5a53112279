"""Transmission eigenvalues, surface-localized eigenstates and resonance imaging.

Subpackages/modules
-------------------
special_fn   Bessel functions and their zeros.
radial       Disk/ball transmission eigenpairs and localization metrics.
forward      2D volume-integral forward scattering and the disk series oracle.
farfield     Far-field matrices, noise model and the far-field operator.
detect       Eigenvalue detection from far-field data (linear sampling).
recover      Eigenfunction recovery by constrained minimization.
imaging      Resonance imaging functional and a direct-sampling baseline.
pspr         Pseudo surface plasmon resonant modes and defect sensing.
"""

__version__ = "0.1.0"
