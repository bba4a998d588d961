"""Overlay rendering for visual inspection."""

from .overlay import DEFAULT_ALPHA, blend, class_colors, write_overlays

__all__ = ["DEFAULT_ALPHA", "blend", "class_colors", "write_overlays"]
