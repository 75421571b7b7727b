"""
Five and six photons in one spatial mode
========================================

Collision-free output distributions for n photons in m = 2n bins, sampled
through a synthetic single-detector time-tag stream and reconstructed again.
"""

import numpy as np

import timebin as tb
from timebin.protocol import FIVE_PHOTON_REFLECTIVITIES, standard_experiment
from timebin.timetags import event_frequencies

experiments = {
    "n=5": standard_experiment(5, "even", FIVE_PHOTON_REFLECTIVITIES),
    "n=6": standard_experiment(6, "odd"),
}

for label, exp in experiments.items():
    M = tb.compile_schedule(exp.schedule)
    theory = tb.output_distribution(M, exp.input)
    print(f"{label}: {len(theory)} collision-free outcomes, P_cf = {theory.mass:.4f}")

    # a source with 94.21% indistinguishability and 6% loop loss
    lossy = tb.compile_schedule(tb.ReflectivitySchedule(exp.m, exp.schedule.reflectivities, loop_transmission=0.94))
    source = tb.output_distribution(lossy, exp.input, model="mixture", x=0.9421)

    stream = tb.synthesize_stream(source, exp, detector_efficiency=0.85, jitter_sigma_ps=50.0,
                                  n_frames=200_000, seed=7)
    records = tb.bin_tags(stream, exp, window_ns=3.0)
    events, census = tb.extract_events(records, exp.n, exp.m)
    freqs = event_frequencies(events, theory)
    print(f"  {sum(events.values())} {exp.n}-photon events; frames by photon count {dict(sorted(census.items()))}")
    print(f"  fidelity to ideal theory: {tb.statistical_fidelity(freqs, theory.probabilities):.4f}")

    top = np.argsort(theory.probabilities)[::-1][:5]
    for i in top:
        print("  ", "".join(map(str, theory.patterns[i])), f"{theory.probabilities[i]:.4f}", f"{freqs[i]:.4f}")
