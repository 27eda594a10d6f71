"""
Scripts package marker.

This file lets you run modules like:
    python -m scripts.test_fpca_mcmc
    python -m scripts.run_acceptance truth
"""
