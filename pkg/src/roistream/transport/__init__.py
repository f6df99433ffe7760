"""Wire protocol, ingest/publish server, and client-side frame pusher."""
from .protocol import ControlMessage, FramePacket, PublishedView, validate_event
from .server import Hub, ServerSession, build_server
from .client import StreamClient

__all__ = [
    "ControlMessage",
    "FramePacket",
    "PublishedView",
    "validate_event",
    "Hub",
    "ServerSession",
    "build_server",
    "StreamClient",
]
