"""Saliency-driven per-CTU QP maps for coding images that machines will analyse.

Detections become a per-CTU saliency mask, the mask becomes a QP map, a codec
(built-in mock or an external encoder) applies it, and the outcome is scored
with instance-weighted mask AP and Bjøntegaard delta rate.
"""

__version__ = "0.1.0"

from .bdrate import RdCurve, RdPoint, bd_rate
from .codec import EncodeResult, Image, external_encode, mock_encode
from .geometry import CtuGrid, Rect, SaliencyMask, ctu_rect, decide_saliency, overlap_area, relative_overlap
from .metrics import ApReport, class_ap, mask_iou, weighted_ap
from .qpmap import QpMap, assign_qps, read_qpmap, write_qpmap

__all__ = [
    "ApReport",
    "CtuGrid",
    "EncodeResult",
    "Image",
    "QpMap",
    "RdCurve",
    "RdPoint",
    "Rect",
    "SaliencyMask",
    "assign_qps",
    "bd_rate",
    "class_ap",
    "ctu_rect",
    "decide_saliency",
    "external_encode",
    "mask_iou",
    "mock_encode",
    "overlap_area",
    "read_qpmap",
    "relative_overlap",
    "weighted_ap",
    "write_qpmap",
]
