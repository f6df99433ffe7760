"""HTTP client for the ingest server."""
from __future__ import annotations

import json

import requests

from ..errors import MalformedPacket, StaleSeq, UnknownSession
from .protocol import FramePacket


class StreamClient:
    def __init__(self, base_url: str, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._http = requests.Session()

    def close(self) -> None:
        self._http.close()

    def _raise_for(self, resp: requests.Response) -> None:
        if resp.status_code < 400:
            return
        try:
            message = resp.json().get("error", resp.text)
        except (ValueError, AttributeError):
            message = resp.text
        if resp.status_code == 409:
            raise StaleSeq(message)
        if resp.status_code == 404:
            raise UnknownSession(message)
        raise MalformedPacket(f"HTTP {resp.status_code}: {message}")

    def post_packet(self, packet: FramePacket) -> int:
        """POST one frame packet; returns the accepted seq."""
        content_type, body = packet.to_multipart()
        resp = self._http.post(
            f"{self.base_url}/ingest/{packet.session_id}",
            data=body,
            headers={"Content-Type": content_type},
            timeout=self.timeout,
        )
        self._raise_for(resp)
        return int(resp.json()["seq"])

    def send_control(self, session_id: str, event: dict) -> None:
        resp = self._http.post(
            f"{self.base_url}/control/{session_id}",
            data=json.dumps(event).encode("utf-8"),
            headers={"Content-Type": "application/json"},
            timeout=self.timeout,
        )
        self._raise_for(resp)

    def get_latest(self, session_id: str) -> tuple[bytes, dict]:
        """Latest warped JPEG plus its X-Seq / X-Staleness-Ms headers."""
        resp = self._http.get(
            f"{self.base_url}/view/{session_id}/latest.jpg", timeout=self.timeout
        )
        self._raise_for(resp)
        return resp.content, dict(resp.headers)

    def get_preview(self, session_id: str) -> tuple[bytes, dict]:
        resp = self._http.get(
            f"{self.base_url}/view/{session_id}/preview.jpg", timeout=self.timeout
        )
        self._raise_for(resp)
        return resp.content, dict(resp.headers)

    def get_meta(self, session_id: str) -> dict:
        resp = self._http.get(
            f"{self.base_url}/view/{session_id}/meta", timeout=self.timeout
        )
        self._raise_for(resp)
        return resp.json()

    def sessions(self) -> list[dict]:
        resp = self._http.get(f"{self.base_url}/sessions", timeout=self.timeout)
        self._raise_for(resp)
        return resp.json()
