"""
Test package for missregress
"""
