"""roistream: quadrilateral ROI detection, perspective correction, and live
frame streaming."""

__version__ = "0.1.0"
