from .external import ExternalResult, render_external, write_request, write_responses
from .splat import RenderedView, SplatCloud, SplatParams, depth_slack, render_splat, splat, surfels

__all__ = [
    "ExternalResult",
    "RenderedView",
    "SplatCloud",
    "SplatParams",
    "depth_slack",
    "render_external",
    "render_splat",
    "splat",
    "surfels",
    "write_request",
    "write_responses",
]
