"""Randomized packet scheduling with deadlines: Mix-R, adversaries, offline optimum."""

from .model import Buffer, ContractError, Packet, PacketFactory, Trace, advance, dominates, strictly_dominates
from .mixr import Chain, Greedy, MixR, build_chain, build_distribution, greedy_select, mixr_chain, restricted_chain, select
from .offline import Schedule, brute_force_opt, opt_schedule, provisional_schedule
from .harness import audit_step, estimate_ratio, ratio_bound

__version__ = "0.1.0"
