"""Safety-critical stepping-stone control with episodic disturbance learning.

Subpackages:
  qp           projection QP solver used by every controller variant
  dynamics     five-link biped + toy models, hybrid simulation
  barriers     phase variable, gait outputs, stepping-stone barriers
  controllers  CBF-QP controller family and disturbance evaluation
  learning     data pipeline, MLP estimator, training
  episodic     the rollout/fit/resynthesize loop
  experiments  config handling, CLI front end
"""

__version__ = "0.1.0"
