"""
Experiment harness: noise synthesis, parameter choice, convergence studies,
the packaged example scenarios and artifact export.
"""
