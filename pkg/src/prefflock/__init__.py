"""Preference-adaptive multi-robot flocking.

A flock simulator whose behavior is steered by a 4-component preference
vector, a neural model that predicts those preferences from flight context,
meta-training so the model adapts to a new operator within a couple of
corrections, and a live session service for steering a flock by hand.
"""

__version__ = "0.1.0"
