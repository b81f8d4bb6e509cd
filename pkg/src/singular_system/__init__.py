"""Positive singular solutions of a gradient-coupled elliptic system on the punctured ball."""
