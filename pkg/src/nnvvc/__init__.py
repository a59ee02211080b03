"""Hybrid learned-intra / conventional-inter video coding for machines, at desk scale."""

__version__ = "0.1.0"
