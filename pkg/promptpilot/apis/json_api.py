__author__ = 'Tommi Enenkel @alice_und_bob'

import asyncio
from datetime import datetime
import httpx
import logging
import time
from ratelimit import RateLimitException, limits
import simplejson as json

from promptpilot.errors import ConfigError, MalformedResponseError, RemoteTransportError

DEFAULT_MAX_CALLS_PER_SEC = 5
DEFAULT_MAX_IN_FLIGHT = 4


class JsonApiWrapper:
    """
    Shared request loop for the JSON-over-HTTP services we talk to: bounded in-flight requests, a calls-per-second
    cap, exponential backoff on 429 and distinct errors for transport failures and malformed payloads.
    """

    def __init__(self, endpoint: str, api_key: str = None, timeout: float = 30.0,
                 max_calls_per_sec: float = DEFAULT_MAX_CALLS_PER_SEC, max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
                 max_retries: int = 5, backoff_base: float = 1.0, max_backoff: float = 60.0, client=None,
                 clock=time.monotonic):
        """
        :param endpoint: full URL requests are POSTed to
        :type endpoint: str
        :param api_key: bearer token. Use None, if the service needs no authentication.
        :type api_key: str or None
        :param timeout: per-request timeout in seconds
        :type timeout: float
        :param max_calls_per_sec: request-rate cap
        :type max_calls_per_sec: float
        :param max_in_flight: maximum number of concurrent requests
        :type max_in_flight: int
        :param max_retries: how often a rate-limited request is retried before giving up
        :type max_retries: int
        :param backoff_base: seconds to wait after the first 429; doubles with every retry
        :type backoff_base: float
        :param client: client to use for sending http requests. If None, a fresh `httpx.AsyncClient` is used per
        request.
        :type client: httpx.AsyncClient
        :param clock: time source of the rate limit
        """
        self.logger = logging.getLogger(__name__)
        self.endpoint = endpoint
        self.api_key = api_key
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.max_backoff = max_backoff
        self.client = client
        self.semaphore = asyncio.Semaphore(max_in_flight)
        self.lock = asyncio.Lock()
        if max_calls_per_sec <= 0:
            raise ConfigError(f"max_calls_per_sec must be positive, got {max_calls_per_sec}")
        self.max_calls_per_sec = max_calls_per_sec
        # one call per 1/rate seconds, so fractional rates keep their meaning
        self._budget = limits(calls=1, period=1.0 / max_calls_per_sec, clock=clock)(lambda: None)
        self.logger.info(f'{type(self).__name__} rate limit set to {max_calls_per_sec} API calls per second'
                         f' and {max_in_flight} requests in flight.')

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key is not None:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    async def _throttle(self):
        """Wait until the rate limit allows the next call, without blocking the event loop."""
        while True:
            try:
                self._budget()
                return
            except RateLimitException as e:
                self.logger.debug(f"rate limit reached, waiting {e.period_remaining:.2f}s")
                await asyncio.sleep(e.period_remaining)

    async def _post(self, client, body: str) -> httpx.Response:
        try:
            async with self.semaphore:
                await self._throttle()
                return await client.post(self.endpoint, headers=self._headers(), content=body, timeout=self.timeout)
        except httpx.TimeoutException as e:
            raise RemoteTransportError(f"request to {self.endpoint} timed out after {self.timeout}s") from e
        except httpx.TransportError as e:
            raise RemoteTransportError(f"request to {self.endpoint} failed: {e}") from e

    async def _query(self, payload: dict) -> dict:
        """
        POST the payload and return the decoded JSON response.

        :param payload: request body
        :type payload: dict
        :returns: JSON structure of the response
        :rtype: dict
        """
        client = self.client
        owns_client = client is None
        if owns_client:
            client = httpx.AsyncClient()

        body = json.dumps(payload)
        attempt = 0
        try:
            while True:  # loop until we get a response
                before = datetime.now()
                response = await self._post(client, body)
                self.logger.debug(f"request took: {datetime.now() - before}")

                if response.status_code == 429:
                    if attempt >= self.max_retries:
                        raise RemoteTransportError(f"still rate limited after {attempt} retries", status_code=429)
                    wait = min(self.backoff_base * 2 ** attempt, self.max_backoff)
                    # lock to prevent multiple requests from trying to sleep at the same time
                    async with self.lock:
                        self.logger.warning(f"API rate limit exceeded. Waiting {wait:.1f} seconds and retrying...")
                        await asyncio.sleep(wait)
                    attempt += 1
                    continue
                if response.status_code in (401, 403):
                    raise RemoteTransportError(f"{self.endpoint} rejected our credentials "
                                               f"(status {response.status_code})", status_code=response.status_code)
                if response.status_code != 200:
                    self.logger.info(f"Status Code: {response.status_code}")
                    self.logger.info(response.headers)
                    raise RemoteTransportError(f"Error: {response.status_code}", status_code=response.status_code)
                break
        finally:
            if owns_client:
                await client.aclose()

        try:
            return json.loads(response.text)
        except json.JSONDecodeError as e:
            raise MalformedResponseError(f"response from {self.endpoint} is not JSON", payload=response.text) from e
