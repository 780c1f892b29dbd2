"""Blind-spot probability of a typical target under correlated obstacle blocking."""
