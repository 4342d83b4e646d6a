"""Littlewood-Paley analysis and perturbation-form Navier-Stokes tools on the periodic box."""
