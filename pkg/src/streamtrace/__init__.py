"""Forensic extraction of Kodi media-center artifacts from a mounted evidence tree."""

__version__ = "0.1.0"
