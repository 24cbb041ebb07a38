import logging
import sys

PACKAGE_LOGGER = "traffic_threat_detector"
STREAM_FORMAT = "%(asctime)s %(name)s %(levelname)s: %(message)s"
FILE_FORMAT = "%(asctime)s [%(threadName)s] %(name)s %(levelname)s: %(message)s"


class Logger:
    def __new__(cls, name, log_file=None, debug=False):
        """
        Setup a pipeline component logger.

        Records go to standard error only; standard output is reserved for
        command results such as ``infer`` predictions.

        :param name: Logger name, usually the owning component's class name
        :param log_file: Optional file to append log records to
        :param debug: Whether to enable debug logging
        :return: Configured logger instance
        """
        level = logging.DEBUG if debug else logging.INFO
        logger = logging.getLogger(name)
        logger.setLevel(level)
        logger.propagate = False

        for handler in logger.handlers[:]:
            logger.removeHandler(handler)

        stream_handler = logging.StreamHandler(sys.stderr)
        stream_handler.setLevel(level)
        stream_handler.setFormatter(logging.Formatter(STREAM_FORMAT))
        logger.addHandler(stream_handler)

        if log_file:
            file_handler = logging.FileHandler(log_file, "a", encoding="utf-8")
            file_handler.setLevel(level)
            file_handler.setFormatter(logging.Formatter(FILE_FORMAT))
            logger.addHandler(file_handler)

        return logger


def package_logger(debug: bool = False, log_file: str | None = None) -> logging.Logger:
    """
    Configure the package root logger.

    Library modules log through ``logging.getLogger(__name__)``, so their
    records (split warnings, zero-division notices, failed power-law fits)
    reach standard error through this logger's handlers.
    """
    return Logger(PACKAGE_LOGGER, log_file=log_file, debug=debug)
