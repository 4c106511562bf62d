# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Tests for the stub and HTTP providers."""

import numpy as np
import pytest
import requests
from requests_mock.mocker import Mocker
from tenacity import wait_none

from aesthetics.providers import (
    HttpProvider,
    ProviderError,
    ProviderUnreachableError,
    StubProvider,
    make_provider,
)

ENDPOINT = "https://provider.example/v1/embed"


@pytest.fixture
def no_backoff(mocker):
    mocker.patch.object(HttpProvider._post_with_retry.retry, "wait", wait_none())


def test_stub_embeddings_are_deterministic_unit_vectors():
    provider = StubProvider(dim=8)

    first = provider.embed(["a sleek wheel", "chunky spokes"])
    second = StubProvider(dim=8).embed(["a sleek wheel"])

    assert first[0] == second[0]
    assert first[0] != first[1]
    assert np.linalg.norm(first[1]) == pytest.approx(1.0)
    assert len(first[1]) == 8


def test_stub_caption_is_deterministic(tmp_path):
    image = tmp_path / "w.png"
    image.write_bytes(b"\x89PNG not really an image")
    provider = StubProvider()

    caption = provider.caption(image, "describe")

    assert caption == provider.caption(image, "describe")
    assert caption.count(". ") >= 4


def test_http_provider_sends_bearer_token(monkeypatch, requests_mock: Mocker):
    monkeypatch.setenv("TEST_PROVIDER_TOKEN", "s3cret")
    requests_mock.post(ENDPOINT, json={"vectors": [[1.0, 0.0], [0.0, 1.0]]})

    vectors = HttpProvider(ENDPOINT, token_env="TEST_PROVIDER_TOKEN").embed(["a", "b"])

    assert vectors == [[1.0, 0.0], [0.0, 1.0]]
    request = requests_mock.last_request
    assert request.headers["Authorization"] == "Bearer s3cret"
    assert request.json() == {"inputs": ["a", "b"]}


def test_http_provider_without_token(monkeypatch, caplog, requests_mock: Mocker):
    monkeypatch.delenv("TEST_PROVIDER_TOKEN", raising=False)
    requests_mock.post(ENDPOINT, json={"vectors": [[1.0]]})

    HttpProvider(ENDPOINT, token_env="TEST_PROVIDER_TOKEN").embed(["a"])

    assert "Authorization" not in requests_mock.last_request.headers
    assert "No provider token found" in caplog.text


@pytest.mark.parametrize("status_code", (400, 401, 500, 503))
def test_http_provider_non_2xx(requests_mock: Mocker, status_code):
    requests_mock.post(ENDPOINT, status_code=status_code)

    with pytest.raises(ProviderError) as raised:
        HttpProvider(ENDPOINT).embed(["a"])

    assert raised.value.status_code == status_code
    assert requests_mock.call_count == 1


@pytest.mark.parametrize(
    "payload",
    (
        {"vectors": [[1.0]]},
        {"embeddings": [[1.0], [2.0]]},
        {"vectors": [[1.0], "oops"]},
    ),
)
def test_http_provider_malformed_answers(requests_mock: Mocker, payload):
    requests_mock.post(ENDPOINT, json=payload)
    with pytest.raises(ProviderError):
        HttpProvider(ENDPOINT).embed(["a", "b"])


def test_http_provider_retries_connection_errors(no_backoff, requests_mock: Mocker):
    requests_mock.post(
        ENDPOINT,
        [
            {"exc": requests.exceptions.ConnectionError},
            {"exc": requests.exceptions.ConnectTimeout},
            {"json": {"vectors": [[0.5]]}},
        ],
    )

    assert HttpProvider(ENDPOINT).embed(["a"]) == [[0.5]]
    assert requests_mock.call_count == 3


def test_http_provider_gives_up_after_three_attempts(no_backoff, requests_mock: Mocker):
    requests_mock.post(ENDPOINT, exc=requests.exceptions.ConnectionError)

    with pytest.raises(ProviderUnreachableError):
        HttpProvider(ENDPOINT).embed(["a"])

    assert requests_mock.call_count == 3


def test_http_provider_caption(tmp_path, requests_mock: Mocker):
    image = tmp_path / "w.png"
    image.write_bytes(b"wheel")
    requests_mock.post(ENDPOINT, json={"captions": ["A five spoke wheel."]})

    caption = HttpProvider(ENDPOINT).caption(image, "describe")

    assert caption == "A five spoke wheel."
    assert requests_mock.last_request.json() == {
        "inputs": [{"image": "d2hlZWw=", "prompt": "describe"}]
    }


@pytest.mark.parametrize(
    "uri, expected",
    (
        ("stub://", StubProvider),
        ("http://localhost:8080/embed", HttpProvider),
        ("https://provider.example/caption", HttpProvider),
    ),
)
def test_make_provider(uri, expected):
    provider = make_provider(uri, dim=16)
    assert isinstance(provider, expected)
    assert provider.dim == 16


def test_make_provider_rejects_unknown_scheme():
    with pytest.raises(ProviderError):
        make_provider("ftp://provider.example")


def test_http_provider_reads_vectors(requests_mock: Mocker):
    requests_mock.post(ENDPOINT, json={"vectors": [[1.0], [2.0]]})

    assert HttpProvider(ENDPOINT).embed(["a", "b"]) == [[1.0], [2.0]]
