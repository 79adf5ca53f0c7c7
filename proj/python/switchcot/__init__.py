"""Budget-aware routing between short and long chain-of-thought."""

from ._core import (
    BackendError,
    ConfigError,
    DataError,
    build_prompt_text,
    count_tokens,
    extract_final_answer,
    load_dataset_summary,
    run_cli,
    sha256_hex,
    split_think_answer,
    truncate_tokens,
)

__all__ = [
    "BackendError",
    "ConfigError",
    "DataError",
    "build_prompt_text",
    "count_tokens",
    "extract_final_answer",
    "load_dataset_summary",
    "run_cli",
    "sha256_hex",
    "split_think_answer",
    "truncate_tokens",
]
