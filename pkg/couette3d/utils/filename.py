import re
from pathlib import Path


def get_next_increment(prefix: str, identifier: str, output_dir: str | Path) -> str:
    """
    Get next run increment as 3-digit string (001, 002, ...).

    Args:
        prefix: experiment kind, e.g. "sim3d"
        identifier: first 12 hex digits of the parameter hash
        output_dir: root directory holding the run directories

    Returns:
        Next increment as "001", "002", etc.
    """
    output_dir = Path(output_dir)
    if not output_dir.exists():
        return "001"

    base_name = f"{prefix}_{identifier}"
    pattern = re.compile(rf"^{re.escape(base_name)}_(\d{{3}})$")

    max_increment = 0
    for entry in output_dir.iterdir():
        if not entry.is_dir():
            continue
        match = pattern.match(entry.name)
        if match:
            increment = int(match.group(1))
            max_increment = max(max_increment, increment)

    return f"{max_increment + 1:03d}"


def run_directory_name(kind: str, parameter_hash: str, output_dir: str | Path) -> str:
    identifier = parameter_hash[:12]
    return f"{kind}_{identifier}_{get_next_increment(kind, identifier, output_dir)}"
