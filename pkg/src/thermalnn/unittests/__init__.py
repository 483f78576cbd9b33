"""
Purpose: Unit tests of the thermalnn package.
"""
