"""Selective eigensolvers for pencils ``lam E v = A v`` with E a projection."""
