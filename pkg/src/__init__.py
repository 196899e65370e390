"""
necklace: Floquet spectra, homoclinic bound states and Klein-Gordon breathers
on the periodic necklace graph.
"""

__version__ = "0.1.0"
