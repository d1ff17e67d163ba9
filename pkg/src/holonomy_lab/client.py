"""Thin client for the holonomy service.

Local mode mounts the ASGI app in-process (no daemon needed: the CLI stays
a service client while `run`/`corpus` keep batch semantics). Remote mode
talks to a running server over HTTP.
"""

from __future__ import annotations

import asyncio
from typing import Any, Optional

import httpx


class ServiceClient:
    def __init__(self, server: Optional[str] = None, timeout: float = 600.0):
        self.server = server
        self.timeout = timeout

    def request(self, method: str, path: str, json: Any = None,
                params: dict | None = None) -> tuple[int, Any]:
        if self.server:
            with httpx.Client(base_url=self.server, timeout=self.timeout) as client:
                resp = client.request(method, path, json=json, params=params)
                return resp.status_code, resp.json()
        return asyncio.run(self._asgi_request(method, path, json, params))

    async def _asgi_request(self, method, path, json, params):
        from .service.app import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport, base_url="http://service",
                                     timeout=self.timeout) as client:
            resp = await client.request(method, path, json=json, params=params)
            return resp.status_code, resp.json()

    # convenience wrappers -------------------------------------------------

    def health(self):
        return self.request("GET", "/health")

    def run_scenario(self, document: str, seed: Optional[int] = None):
        return self.request("POST", "/scenarios/run",
                            json={"document": document, "seed": seed})

    def validate(self, document: str):
        return self.request("POST", "/scenarios/validate", json={"document": document})

    def corpus(self, jobs: int = 1, seed: Optional[int] = None):
        params = {"jobs": jobs}
        if seed is not None:
            params["seed"] = seed
        return self.request("GET", "/corpus", params=params)

    def sweep(self, document: str, param: str, values, seed: Optional[int] = None):
        return self.request("POST", "/sweep", json={
            "document": document, "param": param, "values": list(values), "seed": seed})
