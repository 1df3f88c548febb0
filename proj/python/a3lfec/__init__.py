"""Python bindings for the age-aware FEC transport library.

Simulation keyword arguments use the config-file keys (q_s, p_in, p_out,
duration, k, n, avt, seed, ...). Results come back as plain dicts.
"""

import json

from ._a3lfec import (  # noqa: F401
    CHUNK_HEADER_BYTES,
    FEEDBACK_BYTES,
    CausalityError,
    InsufficientChunksError,
    IoError,
    WireDecodeError,
    age_event_prob,
    allocate_rates,
    bounds_csv,
    decode,
    decode_chunk_packet,
    decode_feedback_packet,
    decode_prob,
    encode,
    encode_chunk_packet,
    fairness_index,
    interval_age_violation,
    outage_prob,
    preset_names,
    sample_decode_prob,
    sigma_upper_bound,
)
from . import _a3lfec

__version__ = "0.1.0"


def run_fsfb_sim(trace=False, **config):
    return json.loads(_a3lfec._run_fsfb_sim(trace, **config))


def run_vsvb_sim(trace=False, **config):
    return json.loads(_a3lfec._run_vsvb_sim(trace, **config))


def run_fixed_rate_sim(sigma, trace=False, **config):
    """Generate-at-will sender at a fixed rate in chunks per slot."""
    return json.loads(_a3lfec._run_fixed_rate_sim(sigma, trace, **config))


def run_preset(name, runs=None, out_dir=""):
    return json.loads(_a3lfec._run_preset(name, runs, str(out_dir)))
