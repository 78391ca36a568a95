"""Abnormality grounding toolkit.

Knowledge-distilled attribute prompts, multi-rater box fusion, coordinate
wire formats, robust model-output parsers, and a full mAP / RoDeO
evaluation stack for chest X-ray grounding benchmarks.
"""

__version__ = "0.1.0"
