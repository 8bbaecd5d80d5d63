"""Layer-wise information probes for a small residual transformer.

The heavy lifting lives in the C++ extension; this package re-exports it.
"""

from ._ridgelab import (
    VOCAB_SIZE,
    ContractViolation,
    Model,
    NumericalError,
    ParseError,
    config_keys,
    default_config,
    entropy,
    generate_split,
    mutual_information,
    normalized,
    run_all,
    token_name,
)

__all__ = [
    "VOCAB_SIZE",
    "ContractViolation",
    "Model",
    "NumericalError",
    "ParseError",
    "config_keys",
    "default_config",
    "entropy",
    "generate_split",
    "mutual_information",
    "normalized",
    "run_all",
    "token_name",
]
