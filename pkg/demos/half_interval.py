"""Why associate at the midpoint of the detection gap.

An accelerating target is seen once per second. Tracking its color forward
for the whole second drifts further than tracking it for half a second, and
the other half is covered by tracking the new detection backward. The script
prints the mean center error at association time for both designs.

    python3 demos/half_interval.py [n_seeds] [hz]
"""

import sys

from lowrate_mot.experiments import mean_propagation_errors

n = int(sys.argv[1]) if len(sys.argv) > 1 else 20
hz = float(sys.argv[2]) if len(sys.argv) > 2 else 1.0
err = mean_propagation_errors(range(n), hz)
print(f"seeds {n}, detections at {hz:g} Hz")
print(f"half interval  {err.half_interval:7.2f} px")
print(f"forward only   {err.forward_only:7.2f} px")
