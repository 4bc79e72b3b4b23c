"""Cached, rate-limited tile fetching with an offline fixture mode.

The client is provider-agnostic: the endpoint is a URL template with
``{lon}``, ``{lat}``, ``{zoom}``, ``{width}``, ``{height}``, and ``{key}``
placeholders, the credential comes from an environment variable, and every
response is cached on disk keyed by the full request identity (endpoint
template included, so switching providers never aliases). Offline mode
serves only from the cache and never touches the network.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

from ..geo import ImageFootprint


class FetchError(RuntimeError):
    pass


class OfflineCacheMiss(FetchError):
    pass


@dataclass(frozen=True)
class TileFetchConfig:
    endpoint: str
    cache_dir: Path
    rate_per_s: float = 2.0
    burst: int = 1
    max_retries: int = 3
    backoff_base_s: float = 0.5
    backoff_max_s: float = 8.0
    offline: bool = True
    api_key_env: str = "TILE_API_KEY"

    def __post_init__(self):
        if self.rate_per_s <= 0:
            raise ValueError("rate_per_s must be positive")
        if self.burst < 1:
            raise ValueError("burst must be at least 1")
        object.__setattr__(self, "cache_dir", Path(self.cache_dir))


class TokenBucket:
    """Blocking token bucket; default capacity 1 enforces strict pacing."""

    def __init__(self, rate_per_s: float, capacity: int = 1, clock=time.monotonic, sleep=time.sleep):
        if rate_per_s <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate_per_s
        self.capacity = capacity
        self.clock = clock
        self.sleep = sleep
        self.tokens = float(capacity)
        self.updated = clock()

    def acquire(self) -> None:
        while True:
            now = self.clock()
            self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
            self.updated = now
            if self.tokens >= 1.0:
                self.tokens -= 1.0
                return
            self.sleep((1.0 - self.tokens) / self.rate)


def _default_transport(url: str) -> bytes:
    with urllib.request.urlopen(url, timeout=30) as resp:
        return resp.read()


class TileFetcher:
    """Cache-first tile client.

    Cache keys hash (endpoint template, center lon/lat, zoom, pixel
    extents); hits never consume rate tokens or touch the transport.
    Online misses go through the token bucket with bounded exponential
    backoff on failure. Cache writes are atomic (temp file then rename).
    Offline fixtures are just cache entries placed ahead of time with
    ``seed_fixture``.
    """

    def __init__(self, config: TileFetchConfig, transport=None, clock=time.monotonic, sleep=time.sleep):
        self.config = config
        self.transport = transport or _default_transport
        self.sleep = sleep
        self.bucket = TokenBucket(config.rate_per_s, config.burst, clock, sleep)
        config.cache_dir.mkdir(parents=True, exist_ok=True)

    def cache_key(self, fp: ImageFootprint) -> str:
        ident = json.dumps(
            [self.config.endpoint, fp.center.lon, fp.center.lat, fp.zoom, fp.width_px, fp.height_px],
            sort_keys=True,
        )
        return hashlib.sha256(ident.encode()).hexdigest()

    def _paths(self, key: str) -> tuple[Path, Path]:
        return self.config.cache_dir / f"{key}.bin", self.config.cache_dir / f"{key}.json"

    def _atomic_write(self, path: Path, payload: bytes) -> None:
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(payload)
        os.replace(tmp, path)

    def seed_fixture(self, fp: ImageFootprint, payload: bytes) -> str:
        """Place deterministic fixture bytes in the cache for offline runs."""
        key = self.cache_key(fp)
        blob, meta = self._paths(key)
        self._atomic_write(blob, payload)
        self._atomic_write(meta, json.dumps(self._provenance(fp, key, "fixture", 0), sort_keys=True).encode())
        return key

    def _provenance(self, fp: ImageFootprint, key: str, source: str, attempts: int) -> dict:
        return {
            "cache_key": key,
            "endpoint": self.config.endpoint,
            "center": [fp.center.lon, fp.center.lat],
            "zoom": fp.zoom,
            "width_px": fp.width_px,
            "height_px": fp.height_px,
            "source": source,
            "attempts": attempts,
        }

    def _url(self, fp: ImageFootprint) -> str:
        key = os.environ.get(self.config.api_key_env, "")
        return self.config.endpoint.format(
            lon=fp.center.lon,
            lat=fp.center.lat,
            zoom=fp.zoom,
            width=fp.width_px,
            height=fp.height_px,
            key=key,
        )

    def fetch(self, fp: ImageFootprint) -> tuple[bytes, dict]:
        """Tile bytes plus a provenance record; cache-first."""
        key = self.cache_key(fp)
        blob, meta = self._paths(key)
        if blob.exists():
            if meta.exists():
                record = json.loads(meta.read_text())
                record["source"] = "cache"
            else:
                record = self._provenance(fp, key, "cache", 0)
            return blob.read_bytes(), record
        if self.config.offline:
            raise OfflineCacheMiss(f"offline mode and no cached tile for key {key}")
        url = self._url(fp)
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            self.bucket.acquire()
            try:
                payload = self.transport(url)
            except Exception as exc:
                last_error = exc
                backoff = min(self.config.backoff_max_s, self.config.backoff_base_s * 2.0**attempt)
                self.sleep(backoff)
                continue
            record = self._provenance(fp, key, "network", attempt + 1)
            self._atomic_write(blob, payload)
            self._atomic_write(meta, json.dumps(record, sort_keys=True).encode())
            return payload, record
        raise FetchError(
            f"fetch failed after {self.config.max_retries + 1} attempts: {last_error}"
        )
