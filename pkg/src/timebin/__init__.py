"""Time-bin multi-photon interference in a single spatial mode.

Compile loop-interferometer schedules into transfer matrices, evaluate and
sample multi-photon output distributions, reduce single-detector time tags
and validate samples.
"""
from .fockcore import (
    PhotonDistribution,
    collision_free_outcomes,
    fock_outcomes,
    outcome_probability,
    outcome_probability_distinguishable,
    output_distribution,
    permanent,
)
from .imperfect import SourceModel, estimate_rates, mix_distinguishability
from .netcompile import ModeMatrix, ReflectivitySchedule, beamsplitter_block, compile_schedule, preview_intensity
from .protocol import (
    CorrelationHistogram,
    ExperimentSpec,
    hom_bin_state,
    hom_histogram,
    standard_experiment,
    visibility,
)
from .timetags import SequenceRecord, TagStream, bin_tags, extract_events, synthesize_stream
from .validate import (
    ValidationReport,
    chi2_two_sample,
    kmeans_cluster,
    rne_counter,
    rne_threshold,
    statistical_fidelity,
    validate_distinguishable,
)

compile = compile_schedule  # noqa: A001

__version__ = "0.1.0"
