"""Offline feature exporters for the clickbait-hybrid model.

Produces the binary inputs the model consumes — EMB1 word/document vector
tables, FTB1 image feature banks — plus fully synthetic, separable corpora
for desk-scale experiments. All outputs are deterministic given their inputs
and seeds, and every export is described by a checksummed manifest.
"""

__version__ = "0.1.0"
