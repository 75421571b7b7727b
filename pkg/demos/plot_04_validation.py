"""
Is it really bosonic interference?
==================================

Two checks on a sample of 5-photon events: a row-norm counter that climbs
for genuine interference and wanders for uniformly random events, and a
clustered chi-squared test that tells distinguishable photons apart.
"""

import math

import numpy as np

import timebin as tb
from timebin.protocol import FIVE_PHOTON_REFLECTIVITIES, standard_experiment
from timebin.validate import validate_uniform

exp = standard_experiment(5, "even", FIVE_PHOTON_REFLECTIVITIES)
M = tb.compile_schedule(exp.schedule)
ideal = tb.output_distribution(M, exp.input)
labelled = tb.output_distribution(M, exp.input, model="distinguishable")
rng = np.random.default_rng(3)

# row-norm counter over 300 events
genuine = ideal.patterns[ideal.sample(rng, 300)]
uniform = np.zeros((300, exp.m), dtype=int)
for row in uniform:
    row[rng.choice(exp.m, exp.n, replace=False)] = 1
print("3 sqrt(300) =", round(3 * math.sqrt(300), 1))
print("counter, ideal sampler:  ", validate_uniform(genuine, M, exp.input).statistic)
print("counter, uniform sampler:", validate_uniform(uniform, M, exp.input).statistic)

# K-means + chi-squared against a bona fide sample
for name, dist in (("indistinguishable", ideal), ("distinguishable", labelled)):
    test = dist.patterns[dist.sample(rng, 5000)]
    report = tb.validate_distinguishable(test, ideal, sample_size=500, seed=11)
    print(f"{name:18s} mean chi2 = {report.statistic:6.2f}  p = {report.p_value:.3g}")
