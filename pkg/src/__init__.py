"""Transmon pad and junction-wire shape optimization."""
