"""Maximal-distance minimizers, Steiner trees and tube volumes of curves."""

__version__ = "0.1.0"
