"""minif: a desk-scale distributed supervisory control framework.

A miniature control system for a simulated laser facility: front-end
processor (FEP) simulators coordinated by a supervisor over a small
message bus, with configuration, reservation, status monitoring, alerts,
logging, persistence and shot sequencing services, steered by an operator
through a web console.
"""

__version__ = "0.1.0"
