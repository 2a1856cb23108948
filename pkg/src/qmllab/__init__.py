"""Desk-scale laboratory for learning keyed pure-state families with an exact probability oracle."""
