# src/parsers/__init__.py
# This file can be empty.
