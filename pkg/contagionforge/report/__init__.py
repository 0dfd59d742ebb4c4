"""
Identification status and CSV tables.
"""
