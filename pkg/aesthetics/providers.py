# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Caption and embedding providers.

A provider is addressed by a URI. `stub://` selects the in-process deterministic provider used
for offline runs and tests; `http://` and `https://` endpoints speak a small JSON protocol:

    POST <endpoint>  {"inputs": [...]}  ->  {"captions": [...]}  or  {"vectors": [[...]]}

The bearer token, if any, is read from an environment variable and never logged.
"""

import base64
import hashlib
import logging
import os
from pathlib import Path
from typing import List, Optional, Protocol, Sequence

import cv2
import numpy as np
import requests
from tenacity import (
    retry,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)

logger = logging.getLogger(__name__)

DEFAULT_TOKEN_ENV = "AESTHETICS_PROVIDER_TOKEN"
STUB_SCHEME = "stub://"


class ProviderError(Exception):
    """Raised if a provider answers with an error or a malformed payload."""

    def __init__(self, *args, status_code: Optional[int] = None, **kwargs):
        super().__init__(*args, **kwargs)
        self.status_code = status_code


class ProviderUnreachableError(ProviderError):
    """Raised if a provider cannot be reached after all retries."""


class CaptionProvider(Protocol):
    """Anything that can describe an image in words."""

    def caption(self, image_path: Path, prompt: str) -> str:
        """Returns a caption for the image at image_path."""


class EmbeddingProvider(Protocol):
    """Anything that can map texts to vectors."""

    dim: Optional[int]

    def embed(self, texts: Sequence[str]) -> List[List[float]]:
        """Returns one vector per text, in input order."""


class StubProvider:
    """Deterministic in-process provider.

    Embeddings are unit vectors drawn from a generator seeded with the sha256 of the text, so the
    same text always maps to the same vector. Captions are assembled from coarse image
    statistics and a hash of the file contents.
    """

    _FINISHES = (
        "polished silver",
        "matte black",
        "gunmetal grey",
        "bright chrome",
        "satin bronze",
    )
    _STYLES = ("sporty", "elegant", "rugged", "classic", "modern", "understated")

    def __init__(self, dim: int = 384):
        self.dim = dim

    def embed(self, texts: Sequence[str]) -> List[List[float]]:
        vectors = []
        for text in texts:
            digest = hashlib.sha256(text.encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            vector = rng.standard_normal(self.dim)
            vectors.append((vector / np.linalg.norm(vector)).tolist())
        return vectors

    def caption(self, image_path: Path, prompt: str) -> str:
        data = Path(image_path).read_bytes()
        digest = hashlib.sha256(data).digest()
        image = cv2.imdecode(np.frombuffer(data, dtype=np.uint8), cv2.IMREAD_GRAYSCALE)
        brightness = float(image.mean()) / 255.0 if image is not None else 0.5
        tone = "bright" if brightness > 0.35 else "dark"
        finish = self._FINISHES[digest[0] % len(self._FINISHES)]
        style = self._STYLES[digest[1] % len(self._STYLES)]
        return (
            f"The image shows a single car wheel photographed face on against a plain background. "
            f"The overall rendering is {tone}, with a {finish} finish across the rim and spokes. "
            f"The spoke pattern radiates evenly from a central hub towards the outer barrel. "
            f"The design reads as {style}, with clean transitions between the spokes and the lip. "
            f"No tyre branding or brake components draw attention away from the wheel itself."
        )


def _encode_image(image_path: Path) -> str:
    return base64.b64encode(Path(image_path).read_bytes()).decode("ascii")


class HttpProvider:
    """Provider behind an HTTP endpoint.

    Connection failures and timeouts are retried three times with exponential backoff before
    ProviderUnreachableError is raised. Any non-2xx answer raises ProviderError immediately.
    """

    def __init__(
        self,
        endpoint: str,
        token_env: str = DEFAULT_TOKEN_ENV,
        timeout: float = 60.0,
        dim: Optional[int] = None,
    ):
        self.endpoint = endpoint
        self.timeout = timeout
        self.dim = dim
        self._token = os.environ.get(token_env)
        if self._token is None:
            logger.info(f"No provider token found in ${token_env}; sending unauthenticated")

    @property
    def headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self._token:
            headers["Authorization"] = f"Bearer {self._token}"
        return headers

    @retry(
        retry=retry_if_exception_type((requests.ConnectionError, requests.Timeout)),
        stop=stop_after_attempt(3),
        wait=wait_exponential(multiplier=0.5, max=8),
        reraise=True,
    )
    def _post_with_retry(self, payload: dict) -> requests.Response:
        return requests.post(
            self.endpoint, json=payload, headers=self.headers, timeout=self.timeout
        )

    def post(self, inputs: list, key: str) -> list:
        """Posts one batch and returns the list stored under `key` in the answer."""
        try:
            response = self._post_with_retry({"inputs": inputs})
        except (requests.ConnectionError, requests.Timeout) as e:
            raise ProviderUnreachableError(f"Provider at {self.endpoint} is unreachable: {e}")

        if not 200 <= response.status_code < 300:
            raise ProviderError(
                f"Provider at {self.endpoint} answered {response.status_code}",
                status_code=response.status_code,
            )
        try:
            results = response.json()[key]
        except (ValueError, KeyError, TypeError):
            raise ProviderError(f"Provider answer has no '{key}' list")
        if not isinstance(results, list) or len(results) != len(inputs):
            raise ProviderError(
                f"Provider returned {len(results) if isinstance(results, list) else 'no'} "
                f"results for {len(inputs)} inputs"
            )
        return results

    def caption(self, image_path: Path, prompt: str) -> str:
        inputs = [{"image": _encode_image(image_path), "prompt": prompt}]
        caption = self.post(inputs, "captions")[0]
        if not isinstance(caption, str):
            raise ProviderError("Caption must be a string")
        return caption

    def embed(self, texts: Sequence[str]) -> List[List[float]]:
        vectors = self.post(list(texts), "vectors")
        for vector in vectors:
            if not isinstance(vector, list):
                raise ProviderError("Each embedding must be a list of numbers")
        return vectors


def make_provider(uri: str, dim: int = 384, token_env: str = DEFAULT_TOKEN_ENV, timeout=60.0):
    """Builds a provider from a `stub://` or `http(s)://` URI."""
    if uri.startswith(STUB_SCHEME):
        return StubProvider(dim=dim)
    if uri.startswith(("http://", "https://")):
        return HttpProvider(uri, token_env=token_env, timeout=timeout, dim=dim)
    raise ProviderError(f"Unsupported provider URI '{uri}'")
