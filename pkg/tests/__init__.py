"""
Tests for the necklace toolkit: one module per src module, slow
convergence studies marked `slow`.
"""
