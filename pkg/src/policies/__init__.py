# src/policies/__init__.py
# This file makes the 'policies' directory a Python package.
