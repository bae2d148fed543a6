"""Keystroke inference from wrist-worn motion sensor streams."""
__version__ = "0.1.0"
