"""Dimensions of self-conformal and Gibbs-projection measures for conformal IFS with overlaps."""
