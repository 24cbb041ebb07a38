import sys
import argparse
import logging
import random
from pathlib import Path

import numpy as np
import requests
import torch
from tenacity import retry, retry_if_exception_type, stop_after_attempt, stop_after_delay, wait_fixed

from .constants import (
    DOWNLOAD_CHUNK_SIZE,
    DOWNLOAD_RETRY_ATTEMPTS,
    DOWNLOAD_RETRY_TIMEOUT,
    DOWNLOAD_RETRY_WAIT_FIXED,
    DOWNLOAD_TIMEOUT,
    EXIT_USAGE_ERROR,
)


def positive_int(value: str) -> int:
    ivalue = int(value)
    if ivalue <= 0:
        raise argparse.ArgumentTypeError(f"{value} is not a positive integer")
    return ivalue


def non_negative_int(value: str) -> int:
    ivalue = int(value)
    if ivalue < 0:
        raise argparse.ArgumentTypeError(f"{value} is not a non-negative integer")
    return ivalue


def positive_float(value: str) -> float:
    fvalue = float(value)
    if not fvalue > 0:
        raise argparse.ArgumentTypeError(f"{value} is not a positive number")
    return fvalue


def unit_fraction(value: str) -> float:
    fvalue = float(value)
    if not 0.0 < fvalue < 1.0:
        raise argparse.ArgumentTypeError(f"{value} is not strictly between 0 and 1")
    return fvalue


def fail_hard(message: str, exit_code: int = EXIT_USAGE_ERROR) -> None:
    logger = logging.getLogger(__name__)
    logger.error(message)
    sys.exit(exit_code)


def seed_everything(seed: int) -> None:
    """
    Seeds every random source the pipeline draws from.

    :param seed: The global seed.
    :type seed: int
    """
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)


@retry(
    retry=retry_if_exception_type(requests.exceptions.RequestException),
    stop=(stop_after_attempt(DOWNLOAD_RETRY_ATTEMPTS) | stop_after_delay(DOWNLOAD_RETRY_TIMEOUT)),
    wait=wait_fixed(DOWNLOAD_RETRY_WAIT_FIXED),
)
def download_file(url: str, destination: Path) -> Path:
    """
    Streams a remote file to disk with configurable retry logic.

    The payload is written to a ``.part`` sibling first and renamed into place
    once complete, so an interrupted download never leaves a truncated file at
    the destination.

    :param url: The URL to download.
    :type url: str
    :param destination: Where to store the file.
    :type destination: Path
    :return: The destination path.
    :rtype: Path
    :raises: tenacity.RetryError: If the download fails after all retry attempts.
    """
    destination.parent.mkdir(parents=True, exist_ok=True)
    partial = destination.with_name(destination.name + ".part")
    with requests.get(url, stream=True, timeout=DOWNLOAD_TIMEOUT) as response:
        response.raise_for_status()
        with open(partial, "wb") as handle:
            for chunk in response.iter_content(chunk_size=DOWNLOAD_CHUNK_SIZE):
                handle.write(chunk)
    partial.replace(destination)
    return destination
