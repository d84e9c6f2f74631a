"""Toy evaluator: the solution file holds a number x; score is -(x-3)^2."""
import sys

x = float(open(sys.argv[1]).read().strip())
print("SCORE", -(x - 3.0) ** 2)
