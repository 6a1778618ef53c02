"""Environment-driven settings."""

import os

from dotenv import load_dotenv

load_dotenv()

LOG_LEVEL = os.getenv("PROJE_LOG_LEVEL", "INFO").upper()

# Per-epoch validation tracks stability on a subset; it is not a full evaluation
VALID_QUERY_LIMIT = int(os.getenv("PROJE_VALID_QUERY_LIMIT", "500"))

EVAL_CHUNK_SIZE = int(os.getenv("PROJE_EVAL_CHUNK_SIZE", "256"))
EVAL_WORKERS = int(os.getenv("PROJE_EVAL_WORKERS", "1"))

# Upper bound on instances × padded candidates × k held in memory at once
TRAIN_CHUNK_CELLS = int(os.getenv("PROJE_TRAIN_CHUNK_CELLS", "4000000"))
