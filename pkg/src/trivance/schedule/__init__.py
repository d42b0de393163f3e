"""Schedule generation for Trivance and the baseline AllReduce algorithms."""

from .generate import ALGORITHMS, VARIANTS, generate, normalize_variant, supported
from .io import from_json, load, save, to_json
from .model import BANDWIDTH, LATENCY, BlockSet, Message, Schedule, Step
from .patterns import (
    block_propagation,
    bruck_peers,
    dim_assignment,
    local_step,
    recdoub_peer,
    swing_rho,
    trivance_block_set,
    trivance_final_distance,
    trivance_peers,
    trivance_rho,
)

__all__ = [
    "ALGORITHMS", "VARIANTS", "BANDWIDTH", "LATENCY", "BlockSet", "Message",
    "Schedule", "Step", "generate", "normalize_variant", "supported",
    "block_propagation", "bruck_peers", "dim_assignment", "local_step",
    "recdoub_peer", "swing_rho", "trivance_block_set", "trivance_final_distance",
    "trivance_peers", "trivance_rho", "from_json", "load", "save", "to_json",
]
