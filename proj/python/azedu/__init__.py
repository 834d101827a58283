"""Gomoku self-play engine: rules, features, network, search and training."""

from ._core import (
    BoardState,
    CorruptCheckpoint,
    GameConfig,
    GameError,
    NetworkConfig,
    Player,
    ShapeMismatch,
    Weights,
    cyclic_lr,
    encode_state,
    init_network,
    load_checkpoint,
    mask_and_renormalize,
    predict,
    read_loss_log,
    save_checkpoint,
    search,
    train,
    transform_point,
    transforms,
)

__all__ = [
    "BoardState",
    "CorruptCheckpoint",
    "GameConfig",
    "GameError",
    "NetworkConfig",
    "Player",
    "ShapeMismatch",
    "Weights",
    "cyclic_lr",
    "encode_state",
    "init_network",
    "load_checkpoint",
    "mask_and_renormalize",
    "predict",
    "read_loss_log",
    "save_checkpoint",
    "search",
    "train",
    "transform_point",
    "transforms",
]
