"""Figures from dtcbf CSV dumps: subdomain maps and policy heatmaps.

Read-only consumer of the verifier's CSV/JSON contract; the only
computation here is evaluating the barrier expression for the h = 0
contour overlay.
"""

from .records import (
    PlotviewError,
    PolicyRecord,
    SubdomainRecord,
    read_policy,
    read_problem,
    read_subdomains,
)
from .hexpr import compile_expression
from .render import CASE_COLORS, render_map, render_policy

__all__ = [
    "CASE_COLORS",
    "PlotviewError",
    "PolicyRecord",
    "SubdomainRecord",
    "compile_expression",
    "read_policy",
    "read_problem",
    "read_subdomains",
    "render_map",
    "render_policy",
]
