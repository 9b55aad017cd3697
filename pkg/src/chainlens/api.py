"""History API client: paginated fetch with retry, throttle, and cache.

The endpoint serves daily market snapshots as JSON pages shaped like

    {"data": [{row}, ...], "page": 1, "total_pages": 3}

where each row carries ``name``, ``symbol``, ``date`` and the standard
numeric columns (null = absent); the exact payload shape is documented
by example in tests/fixtures/api_payload_format.json. Successful page
bodies are cached on disk keyed by (endpoint, params), so a rerun with
the same config needs no network at all. That cache is the reason the
whole pipeline stays reproducible offline against a proprietary source.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import urlencode

import requests

from .dataset import Dataset, NUMERIC_COLUMNS, snapshot_from_mapping
from .errors import (
    ApiError,
    AuthenticationError,
    RateLimitError,
    SchemaDriftError,
)

HISTORY_PATH = "/v1/history"
API_KEY_ENV = "CHAINLENS_API_KEY"
CACHE_DIR_ENV = "CHAINLENS_CACHE_DIR"

_ROW_FIELDS = ("name", "symbol", "date") + NUMERIC_COLUMNS
_ENVELOPE_FIELDS = ("data", "page", "total_pages")


@dataclass(frozen=True)
class ApiClientConfig:
    base_url: str
    api_key: str | None = None  # falls back to CHAINLENS_API_KEY
    date_range: tuple[dt.date | None, dt.date | None] | None = None
    rate_limit: float = 5.0  # requests per second
    max_attempts: int = 4
    backoff_seconds: float = 0.5
    cache_dir: str | Path | None = None  # falls back to CHAINLENS_CACHE_DIR

    def __post_init__(self):
        if not self.base_url.strip():
            raise ApiError("base_url must be non-empty")
        if self.rate_limit <= 0:
            raise ApiError(f"rate_limit must be positive, got {self.rate_limit}")
        if self.max_attempts < 1:
            raise ApiError(f"max_attempts must be at least 1, got {self.max_attempts}")
        if self.backoff_seconds < 0:
            raise ApiError("backoff_seconds cannot be negative")
        if self.date_range is not None:
            start, end = self.date_range
            if start is not None and end is not None and start > end:
                raise ApiError(f"empty date range: {start} > {end}")

    def resolved_key(self) -> str:
        key = self.api_key or os.environ.get(API_KEY_ENV, "")
        if not key:
            raise AuthenticationError(
                f"no API key: set {API_KEY_ENV} or pass api_key explicitly"
            )
        return key

    def resolved_cache_dir(self) -> Path:
        if self.cache_dir is not None:
            return Path(self.cache_dir)
        env = os.environ.get(CACHE_DIR_ENV)
        if env:
            return Path(env)
        return Path.home() / ".cache" / "chainlens"


def _cache_path(cache_dir: Path, endpoint: str, params: dict) -> Path:
    digest = hashlib.sha256(
        f"{endpoint}?{urlencode(sorted(params.items()))}".encode()
    ).hexdigest()
    return cache_dir / f"{digest}.json"


class _Throttle:
    """Spaces request starts at least 1/rate_limit seconds apart."""

    def __init__(self, rate_limit: float):
        self.interval = 1.0 / rate_limit
        self.last = None

    def wait(self):
        now = time.monotonic()
        if self.last is not None:
            remaining = self.interval - (now - self.last)
            if remaining > 0:
                time.sleep(remaining)
                now = time.monotonic()
        self.last = now


def _request_page(
    session: requests.Session,
    url: str,
    params: dict,
    headers: dict,
    config: ApiClientConfig,
    throttle: _Throttle,
) -> str:
    last_status = None
    for attempt in range(1, config.max_attempts + 1):
        if attempt > 1:
            time.sleep(config.backoff_seconds * 2 ** (attempt - 2))
        throttle.wait()
        try:
            response = session.get(url, params=params, headers=headers, timeout=30)
        except requests.RequestException as exc:
            last_status = f"network error: {exc}"
            continue
        if response.status_code == 200:
            return response.text
        if response.status_code == 401:
            raise AuthenticationError(f"history API rejected the key at {url}")
        if response.status_code == 429 or response.status_code >= 500:
            last_status = response.status_code
            continue
        raise ApiError(f"history API returned {response.status_code} for {url}")
    if last_status == 429:
        raise RateLimitError(
            f"still throttled after {config.max_attempts} attempts to {url}"
        )
    raise ApiError(
        f"history API unavailable after {config.max_attempts} attempts "
        f"to {url} (last: {last_status})"
    )


def _parse_page(body: str) -> dict:
    try:
        payload = json.loads(body)
    except json.JSONDecodeError as exc:
        raise ApiError(f"history API returned invalid JSON: {exc}") from exc
    for field in _ENVELOPE_FIELDS:
        if field not in payload:
            raise SchemaDriftError(field, "response envelope")
    return payload


def _rows_to_snapshots(rows, page: int):
    snapshots = []
    for row in rows:
        for field in _ROW_FIELDS:
            if field not in row:
                raise SchemaDriftError(field, f"page {page} row")
        try:
            snapshots.append(snapshot_from_mapping(row))
        except (ValueError, KeyError) as exc:
            raise ApiError(f"bad value in page {page} row: {exc}") from exc
    return snapshots


def fetch_history(config: ApiClientConfig) -> Dataset:
    """Pull the full paginated history into one Dataset.

    Each page is fetched at most once per (endpoint, params) thanks to
    the disk cache; retries with exponential backoff cover throttling
    and transient server failures. The merged result obeys the same
    invariants as a CSV load (sorted, duplicate coin-days rejected).
    """
    key = config.resolved_key()
    cache_dir = config.resolved_cache_dir()
    cache_dir.mkdir(parents=True, exist_ok=True)
    url = config.base_url.rstrip("/") + HISTORY_PATH
    base_params: dict = {}
    if config.date_range is not None:
        start, end = config.date_range
        if start is not None:
            base_params["start"] = start.isoformat()
        if end is not None:
            base_params["end"] = end.isoformat()

    throttle = _Throttle(config.rate_limit)
    snapshots = []
    page = 1
    total_pages = 1
    with requests.Session() as session:
        headers = {"X-API-Key": key, "Accept": "application/json"}
        while page <= total_pages:
            params = dict(base_params, page=page)
            cache_file = _cache_path(cache_dir, url, params)
            if cache_file.exists():
                body = cache_file.read_text(encoding="utf-8")
            else:
                body = _request_page(session, url, params, headers, config, throttle)
                cache_file.write_text(body, encoding="utf-8")
            payload = _parse_page(body)
            total_pages = int(payload["total_pages"])
            snapshots.extend(_rows_to_snapshots(payload["data"], page))
            page += 1
    return Dataset.build(snapshots)
