"""pcwgprobe: fiber-taper probing of planar photonic-crystal waveguides.

Submodules
----------
fiber     exact air-clad fiber dispersion, mode fields, taper profiles
slab      vertical (slab) effective-index solver for the membrane
bands     2D plane-wave bandstructures: bulk lattice and supercell defect
coupling  coupled-mode transfer functions, overlap kappa, metrics
pipeline  transmission-map synthesis, resonance extraction, bandstructure
cli       command-line front end
"""

__version__ = "0.1.0"
