"""
Core numerics: geometry, flows, transport, transforms and reconstruction.
"""
