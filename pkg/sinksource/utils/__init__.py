"""
Utility helpers for the sinksource toolkit.
"""
