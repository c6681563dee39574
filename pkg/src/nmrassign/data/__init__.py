"""Bundled data files: prior table and reference shift sets."""
