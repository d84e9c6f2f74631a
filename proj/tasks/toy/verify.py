"""Independent recompute of the toy score (same objective, separate process)."""
import sys

x = float(open(sys.argv[1]).read().strip())
print("SCORE", -(x - 3.0) ** 2)
