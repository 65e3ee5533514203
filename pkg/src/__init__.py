"""Branch Network Stability Tool - Stabilité des réseaux de files à branchement contrôlé."""

__version__ = "0.1.0"
__author__ = "SofianeLasri"
