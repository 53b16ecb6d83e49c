"""
Finite element layer: meshes, conductivity, assembly and the forward matrix.
"""
