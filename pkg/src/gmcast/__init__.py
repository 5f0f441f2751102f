"""Generic multicast: ordered group communication that only serializes
conflicting messages, simulated deterministically and checked against its
safety and liveness properties.
"""

from .core import (ALL, NONE, RW_KEY, Advance, Begin, ConflictRelation,
                   GmcastError, GroupPartition, Message, NotCoverable,
                   Operation, OpKind, TsPair, conflict_msg, conflict_rw,
                   gb_conflict, partition_of, ts_less)
from .scenario import (ConfigError, Scenario, ScenarioInvalid, bundled_path,
                       load_scenario, parse_scenario)
from .simnet import (NonQuiescent, NotDelivered, Trace, commit_latency,
                     delivery_latency, run)
from .checker import (Verdict, check_integrity, check_invariants,
                      check_minimality, check_ordering, check_termination,
                      find_strictness_witness, run_all_checks)
from .kvstore import Store, check_convergence, replay_stores
from .report import RunReport, build_report, classify_run

__version__ = "0.1.0"
