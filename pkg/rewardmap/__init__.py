"""
RewardMap
Transit-map question generation, difficulty-aware reward scoring, multi-stage
curricula and a desk-scale GRPO simulation.
"""

__version__ = "0.1.0"
