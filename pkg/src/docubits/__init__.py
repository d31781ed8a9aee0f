"""DocuBits: fragment instructional documents into portable, stateful,
spatially anchored text bits shared across a collaborative session.

The package is layered: pure domain modules (document, bits, spatial,
animation), the event-sourced session engine on top of them, and around
that the wire protocol, server, simulation harness, persistence, metrics
and CLI.
"""

__version__ = "0.1.0"

from .bits import DocuBit, InStack, Placed, Status
from .document import HighlightSegment, SourceDocument, StepSegment
from .errors import RejectReason
from .session import SessionState, empty_state, snapshot_hash
from .spatial import Frustum, Pose

__all__ = [
    "DocuBit",
    "Frustum",
    "HighlightSegment",
    "InStack",
    "Placed",
    "Pose",
    "RejectReason",
    "SessionState",
    "SourceDocument",
    "Status",
    "StepSegment",
    "empty_state",
    "snapshot_hash",
    "__version__",
]
