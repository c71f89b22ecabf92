"""
Test suite for the BO Survey package.
"""
