"""models of the files written to an output folder"""
