"""Road maintenance inspection post-processing.

Turns per-frame imagery plus upstream segmentation masks and detection boxes
into geolocated findings (worn markings, damaged or skewed signs, unsafe
guardrails) and writes them as a GeoJSON damage map.
"""
from .barriers import BarrierAssessment, BarrierAssessor, BarrierParams, assess_barriers
from .geometry import Contour, RotatedRect, contour_area, convex_hull, min_area_rect, polygon_area, solidity, trace_contours
from .geotag import FrameClock, GpsFix, GpsTrack, geolocate, interpolate, parse_track
from .marking import MarkingDamageDetector, MarkingDamageRegion, MarkingParams, marking_damage, refine_marking_mask
from .pipeline import ManifestInvalid, RunSummary, run, validate
from .raster import (
    adaptive_threshold,
    convolve,
    extract_class_mask,
    filter_bank_response,
    load_image,
    save_image,
    to_gray,
)
from .report import Finding, GeoFinding, detection_map, mask_miou, to_geojson
from .signs import (
    DetectionBox,
    ReferenceLibrary,
    SignCondition,
    SignConditionClassifier,
    SignParams,
    classify_sign,
    normalize_crop,
    pole_skew,
    sign_similarity,
)
from .superpixel import SlicParams, SlicSegmenter, SuperpixelLabeling, slic, superpixel_density

__version__ = "0.1.0"

__all__ = [
    "BarrierAssessment",
    "BarrierAssessor",
    "BarrierParams",
    "Contour",
    "DetectionBox",
    "Finding",
    "FrameClock",
    "GeoFinding",
    "GpsFix",
    "GpsTrack",
    "ManifestInvalid",
    "MarkingDamageDetector",
    "MarkingDamageRegion",
    "MarkingParams",
    "ReferenceLibrary",
    "RotatedRect",
    "RunSummary",
    "SignCondition",
    "SignConditionClassifier",
    "SignParams",
    "SlicParams",
    "SlicSegmenter",
    "SuperpixelLabeling",
    "adaptive_threshold",
    "assess_barriers",
    "classify_sign",
    "contour_area",
    "convex_hull",
    "convolve",
    "detection_map",
    "extract_class_mask",
    "filter_bank_response",
    "geolocate",
    "interpolate",
    "load_image",
    "marking_damage",
    "mask_miou",
    "min_area_rect",
    "normalize_crop",
    "parse_track",
    "pole_skew",
    "polygon_area",
    "refine_marking_mask",
    "run",
    "save_image",
    "sign_similarity",
    "slic",
    "solidity",
    "superpixel_density",
    "to_geojson",
    "to_gray",
    "trace_contours",
    "validate",
]
