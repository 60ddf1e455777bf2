"""Thermal Casimir pressure between metal plates and the classical transverse-stress check."""
