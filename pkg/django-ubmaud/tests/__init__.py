"""
Test suite for the django-ubmaud package.
"""
