"""Chat-completion model client.

Wire contract: POST {model, messages: [{role, content}]} -> {content}.
Endpoint and key come from configuration or the MODEL_ENDPOINT /
MODEL_API_KEY environment variables. Everything that consumes a client only
needs ``complete(messages) -> str``, so tests substitute plain fakes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Protocol

import httpx


class ChatClient(Protocol):
    def complete(self, messages: List[Dict[str, str]]) -> str: ...


@dataclass
class HttpChatClient:
    endpoint: str
    model: str = "phi3"
    api_key: Optional[str] = None
    timeout: float = 10.0

    def complete(self, messages: List[Dict[str, str]]) -> str:
        headers = {}
        key = self.api_key or os.environ.get("MODEL_API_KEY")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        resp = httpx.post(
            self.endpoint,
            json={"model": self.model, "messages": messages},
            headers=headers,
            timeout=self.timeout,
        )
        resp.raise_for_status()
        return resp.json()["content"]


def client_from_env() -> Optional[HttpChatClient]:
    endpoint = os.environ.get("MODEL_ENDPOINT")
    if not endpoint:
        return None
    return HttpChatClient(endpoint=endpoint)
