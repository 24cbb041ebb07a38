import logging

import pytest

from traffic_threat_detector.logger import PACKAGE_LOGGER


@pytest.fixture(autouse=True)
def reset_package_logger():
    """
    The CLI configures the package logger with propagation off; restore it so
    caplog keeps seeing records from module loggers in later tests.
    """
    yield
    logger = logging.getLogger(PACKAGE_LOGGER)
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)
    logger.propagate = True
    logger.setLevel(logging.NOTSET)
