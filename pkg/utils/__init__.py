"""
Utility functions and helpers for the Low Vision GUI Checker.
"""
