"""
rayforge - forward and inverse non-Abelian ray transforms on magnetic systems
"""

__version__ = "1.0.0"
__author__ = "rayforge developers"
