"""Numerical services: function algebra, construction, discretization, checks."""
