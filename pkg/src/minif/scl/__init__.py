"""Sequence Control Language: XML-defined automation over control points."""

from .doc import (SequenceDoc, Step, Repeat, Parallel, WaitFor, Select,
                  RaiseAlert, MAX_DEPTH)
from .parse import (parse_sequence, render_sequence, XmlSyntax, UnknownElement,
                    BadAttribute, DepthExceeded)
from .validate import validate, Issue, SimpleCatalog
from .engine import (Engine, SclContext, ExecTrace, Execution, StepFailed,
                     WaitTimeout, OperatorAbort, NotPaused, TickGate,
                     ServiceAlertBackend, ClientAlertBackend, ABORT_OPTION)

__all__ = [
    "SequenceDoc", "Step", "Repeat", "Parallel", "WaitFor", "Select",
    "RaiseAlert", "MAX_DEPTH",
    "parse_sequence", "render_sequence", "XmlSyntax", "UnknownElement",
    "BadAttribute", "DepthExceeded",
    "validate", "Issue", "SimpleCatalog",
    "Engine", "SclContext", "ExecTrace", "Execution", "StepFailed",
    "WaitTimeout", "OperatorAbort", "NotPaused", "TickGate",
    "ServiceAlertBackend", "ClientAlertBackend", "ABORT_OPTION",
]
