"""Two-level fingerprinting and traceability codes.

Users sit in ``M1`` groups of ``M2`` members.  A minimum-distance decoder
should name a pirate when the coalition is small and at least a pirate's
group when it is larger.
"""
__version__ = "0.1.0"

from .core import OneLevelCode, TwoLevelCode, UsageError, UserId, add_mod_q, dist_to_set, hamming_distance, weight
from .construct import ConstructionParams, build_random_two_level, min_distances
from .decode import TieBreak, md_decode, md_decode_group
from .envelope import envelope_contains, envelope_enumerate, envelope_size
from .verify import check_prop1, verify_ta_exhaustive

__all__ = [
    "ConstructionParams",
    "OneLevelCode",
    "TieBreak",
    "TwoLevelCode",
    "UsageError",
    "UserId",
    "add_mod_q",
    "build_random_two_level",
    "check_prop1",
    "dist_to_set",
    "envelope_contains",
    "envelope_enumerate",
    "envelope_size",
    "hamming_distance",
    "md_decode",
    "md_decode_group",
    "min_distances",
    "verify_ta_exhaustive",
    "weight",
]
