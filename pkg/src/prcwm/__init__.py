"""Pseudorandom codes robust to substitutions and edits, and LM watermarks built on them."""
from .core import (BINARY, Alphabet, Permutation, Seed, SymbolString, apply_permutation, edit_distance,
                   hamming_distance, random_permutation)
from .errors import PrcError

__version__ = "0.1.0"

__all__ = ["Alphabet", "BINARY", "SymbolString", "Permutation", "Seed", "PrcError", "hamming_distance",
           "edit_distance", "random_permutation", "apply_permutation"]
