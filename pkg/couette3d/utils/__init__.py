from .filename import get_next_increment, run_directory_name
from .hashing import canonical_json, parameter_hash

__all__ = ["get_next_increment", "run_directory_name", "canonical_json", "parameter_hash"]
