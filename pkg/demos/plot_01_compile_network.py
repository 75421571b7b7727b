"""
From a reflectivity schedule to a mode matrix
=============================================

A loop interferometer with m-1 programmable reflectivities acts as a chain
of beamsplitters between consecutive time bins. This script compiles the
8-photon schedule R_k = k/(k+1) and looks at the result.
"""

import numpy as np

import timebin as tb
from timebin.netcompile import staircase_reflectivities

# the 16-bin staircase schedule
schedule = tb.ReflectivitySchedule(16, staircase_reflectivities(16), bin_period_ns=100.0)
M = tb.compile_schedule(schedule)
print("unitary:", M.is_unitary())

# bins can only move forward by one slot per round trip, backwards by any amount:
# everything above the first superdiagonal vanishes
upper = np.triu(np.abs(M.entries), k=2)
print("largest entry above the band:", upper.max())

# a lossy loop: each traversal keeps a fraction eta of the amplitude squared
lossy = tb.compile_schedule(tb.ReflectivitySchedule(16, schedule.reflectivities, loop_transmission=0.94))
print("column norms with loss:", np.round(np.linalg.norm(lossy.entries, axis=0), 3))

# with the loop blocked only the transmitted light 1 - R_k reaches the detector
for k, t in enumerate(tb.preview_intensity(schedule), start=1):
    print(f"t = {k * 100:5d} ns  transmission {t:.3f}")
