"""
Inverse layer: spectral tools, sparse configurations, certificates and solvers.
"""
