"""Cross-shard transfers over netted EE balances, with a lockstep simulator."""

from .core import (
    CreditTx,
    DebitTx,
    Endpoint,
    LossRecord,
    PartStateCell,
    RevertRecord,
    ShardState,
    StructuralError,
    ToCreditEvent,
    netted_transfer,
    real_balance,
)

__version__ = "0.1.0"

__all__ = [
    "CreditTx",
    "DebitTx",
    "Endpoint",
    "LossRecord",
    "PartStateCell",
    "RevertRecord",
    "ShardState",
    "StructuralError",
    "ToCreditEvent",
    "netted_transfer",
    "real_balance",
]
