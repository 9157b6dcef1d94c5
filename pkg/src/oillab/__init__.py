"""Observational imitation learning lab: a deterministic 2D track simulator,
PID teacher ensembles, an MLP control policy trained by imitating only the
currently best teacher, IL/RL baselines, and a lap-based evaluation protocol.
"""

__version__ = "0.1.0"
