"""Interactive rule-based data repair.

The package detects violations of conditional functional dependencies,
suggests candidate cell updates, ranks groups of suggestions by how much
data quality each group is expected to buy, and learns from user feedback
so the bulk of the decisions can be delegated to a trained model.
"""

from .model import DataError, Dataset, Schema, Tuple
from .rules import CfdRule, RuleParseError, RuleSet, parse_rules, parse_rules_file
from .similarity import levenshtein, similarity
from .state import CandidateUpdate, RepairState
from .violations import ViolationIndex, detect_all, total_violations

__version__ = "0.1.0"

__all__ = [
    "CandidateUpdate",
    "CfdRule",
    "DataError",
    "Dataset",
    "RepairState",
    "RuleParseError",
    "RuleSet",
    "Schema",
    "Tuple",
    "ViolationIndex",
    "detect_all",
    "levenshtein",
    "parse_rules",
    "parse_rules_file",
    "similarity",
    "total_violations",
    "__version__",
]
