"""H2xL2-optimal reduced-order modeling for parametric LTI systems with diagonal structure."""
