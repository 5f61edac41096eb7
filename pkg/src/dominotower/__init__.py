"""Domino problems on towers of graphs."""
