"""
End-to-end runs of the command line into a scratch output directory.
"""
