"""Tools package: differentiable dynamic programming utilities."""
