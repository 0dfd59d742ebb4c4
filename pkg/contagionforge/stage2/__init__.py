"""
Stage 2: structural channel attribution of detected links.
"""
