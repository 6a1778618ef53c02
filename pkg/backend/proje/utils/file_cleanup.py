"""Remove partial outputs and write files atomically."""

import logging
import os
from typing import Callable, IO

logger = logging.getLogger(__name__)


def delete_file(file_path: str) -> None:
    """Delete a file if it exists."""
    try:
        if os.path.exists(file_path):
            os.remove(file_path)
            logger.info("Deleted file: %s", file_path)
    except OSError as e:
        logger.error("Failed to delete file %s: %s", file_path, e)


def atomic_write(path: str, write: Callable[[IO], None], binary: bool = False) -> None:
    """Write through a temporary sibling, renamed into place on success.

    A failed write leaves no file at `path` and no temporary behind.
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    tmp_path = f"{path}.tmp"
    try:
        if binary:
            with open(tmp_path, "wb") as f:
                write(f)
        else:
            with open(tmp_path, "w", encoding="utf-8", newline="") as f:
                write(f)
        os.replace(tmp_path, path)
    except BaseException:
        delete_file(tmp_path)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write(path, lambda f: f.write(text))


def atomic_write_bytes(path: str, data: bytes) -> None:
    atomic_write(path, lambda f: f.write(data), binary=True)
