import argparse
import sys
import pytest
import requests
import tenacity
import torch
from unittest.mock import patch, MagicMock
from traffic_threat_detector.utils import (
    positive_int,
    non_negative_int,
    positive_float,
    unit_fraction,
    fail_hard,
    seed_everything,
    download_file,
)

from traffic_threat_detector.constants import (
    DOWNLOAD_RETRY_ATTEMPTS,
    DOWNLOAD_TIMEOUT,
    EXIT_DATA_ERROR,
)

TEST_URL = "http://example.com/dataset.csv"


def test_positive_int():
    assert positive_int("5") == 5
    with pytest.raises(argparse.ArgumentTypeError):
        positive_int("-1")
    with pytest.raises(argparse.ArgumentTypeError):
        positive_int("0")


def test_non_negative_int():
    assert non_negative_int("0") == 0
    assert non_negative_int("7") == 7
    with pytest.raises(argparse.ArgumentTypeError):
        non_negative_int("-1")


def test_positive_float():
    assert positive_float("0.5") == 0.5
    with pytest.raises(argparse.ArgumentTypeError):
        positive_float("0")


def test_unit_fraction():
    assert unit_fraction("0.8") == 0.8
    for bad in ("0", "1", "1.5", "-0.2"):
        with pytest.raises(argparse.ArgumentTypeError):
            unit_fraction(bad)


def test_fail_hard(caplog):
    with patch.object(sys, "exit") as mock_exit:
        fail_hard("Test error")
        mock_exit.assert_called_with(1)
        assert "Test error" in caplog.text


def test_fail_hard_exit_code():
    with patch.object(sys, "exit") as mock_exit:
        fail_hard("Data error", EXIT_DATA_ERROR)
        mock_exit.assert_called_with(EXIT_DATA_ERROR)


def test_seed_everything_is_reproducible():
    seed_everything(123)
    first = torch.rand(4)
    seed_everything(123)
    assert torch.equal(first, torch.rand(4))


def _streaming_response(chunks):
    response = MagicMock()
    response.__enter__.return_value = response
    response.iter_content.return_value = chunks
    return response


@patch("requests.get")
def test_download_file_success(mock_get, tmp_path):
    mock_get.return_value = _streaming_response([b"a,b\n", b"1,2\n"])
    destination = tmp_path / "sub" / "dataset.csv"
    result = download_file(TEST_URL, destination)
    assert result == destination
    assert destination.read_bytes() == b"a,b\n1,2\n"
    assert not (tmp_path / "sub" / "dataset.csv.part").exists()
    mock_get.assert_called_once_with(TEST_URL, stream=True, timeout=DOWNLOAD_TIMEOUT)


@patch("requests.get")
@patch("tenacity.nap.time.sleep")
def test_download_file_failure(_, mock_get, tmp_path):
    mock_get.side_effect = requests.exceptions.RequestException("Test connection error")
    destination = tmp_path / "dataset.csv"
    with pytest.raises(tenacity.RetryError):
        download_file(TEST_URL, destination)

    mock_get.assert_called_with(TEST_URL, stream=True, timeout=DOWNLOAD_TIMEOUT)
    assert mock_get.call_count == DOWNLOAD_RETRY_ATTEMPTS
    assert not destination.exists()
