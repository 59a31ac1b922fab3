"""affplan: affordance detections in, symbolic plans out.

The package has three layers:
  * verified numeric kernels: region self-attention with exact gradients,
    detector/affordance losses, and weighted F-measure metrics;
  * a small planning engine: PDDL-subset parser, grounder, search and
    plan validation;
  * scene grounding: detections + cross-session state keeper -> planning
    problem, plus a symbolic executor to rehearse plans.
"""

__version__ = "0.1.0"

from . import attention, losses, metrics, numeric, pddl, scene, sim
from ._kernels import backend_name

__all__ = [
    "__version__",
    "backend_name",
    "numeric",
    "attention",
    "losses",
    "metrics",
    "pddl",
    "scene",
    "sim",
]
