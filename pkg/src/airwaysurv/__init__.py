"""Airway segmentation scoring and radiomics-based survival classification.

Submodules
----------
volume_io
    NIfTI-1 reading and writing into :class:`Volume` and :class:`Mask`.
morphology
    Closing, connected components, trachea isolation and bounding boxes.
radiomics
    First-order, texture and shape features of an ROI.
segmetrics
    IoU, precision, leakage, centerline length and branch ratios.
learning
    Correlation selection, min-max scaling, SMO-trained RBF SVM and
    cross-validation.
pipeline
    Configuration and the ``airwaysurv`` command line.
"""
__version__ = "0.1.0"

from .volume_io import Geometry, Mask, Volume, read_mask, read_volume, write_mask, write_volume

__all__ = ["Geometry", "Mask", "Volume", "read_mask", "read_volume", "write_mask", "write_volume",
           "__version__"]
