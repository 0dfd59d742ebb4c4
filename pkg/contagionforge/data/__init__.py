"""
Input loading and synthetic fixtures.
"""
