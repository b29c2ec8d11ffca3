"""Data-pooling reinforcement learning for finite-horizon tabular MDPs."""
