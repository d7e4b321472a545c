"""Wireless sensing from harvested RF voltage.

Subpackages
-----------
physics
    Friis gain, Fresnel-zone diffraction, path loss, rectifier and
    capacitor-charging models.
simulate
    Body trajectories and harvested-voltage trace synthesis.
dsp
    Savitzky-Golay smoothing, variance segmentation, normalisation and
    resampling to 128-sample segments.
respiration
    Variance-peak breath counting.
classifier
    numpy 1D CNN for activity and gesture segments.
harness
    Configuration, file formats, pipeline orchestration and the CLI.
"""

from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
