"""
Run configuration for the CHR confluence checker
Defaults come from the environment (optionally a .env file); command-line flags override them
"""

import os
import re
from dataclasses import dataclass
from typing import Optional, Tuple

from dotenv import load_dotenv

from core.errors import ChrError
from core.solver import Universe

# Load environment variables
load_dotenv()

FORMATS = ("text", "structured")


class ConfigError(ChrError):
    """Malformed configuration value"""


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}")


def env_defaults() -> dict:
    return {
        "object_fuel": _env_int("CHR_OBJECT_FUEL", 1000),
        "fuel": _env_int("CHR_META_FUEL", 12),
        "split_budget": _env_int("CHR_SPLIT_BUDGET", 4),
        "oracle_limit": _env_int("CHR_ORACLE_LIMIT", 4000),
        "jobs": _env_int("CHR_JOBS", 1),
        "log_level": os.getenv("CHR_LOG_LEVEL", "INFO"),
        "modal_table": os.getenv("CHR_MODAL_TABLE") or None,
    }


@dataclass(frozen=True)
class RunConfig:
    program_path: str
    spec_path: Optional[str] = None
    modulo_equivalence: bool = False
    invariant_only: bool = False
    assume_termination: bool = False
    fuel: int = 12
    split_budget: int = 4
    object_fuel: int = 1000
    oracle_limit: int = 4000
    universe: Optional[Universe] = None
    output_format: str = "text"
    jobs: int = 1
    builtins: Optional[Tuple[str, ...]] = None
    trace: bool = False
    modal_table: Optional[str] = None

    @property
    def structured(self) -> bool:
        return self.output_format == "structured"


_RANGE = re.compile(r"^\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*$")


def parse_universe(text: Optional[str]) -> Optional[Universe]:
    """
    Parse an oracle universe such as `ints=-2..70;consts=a,b;vars=X,Y`

    Every part is optional; missing parts keep the Universe defaults.
    """
    if text is None or not text.strip():
        return None
    fields = {}
    for part in text.split(";"):
        if not part.strip():
            continue
        if "=" not in part:
            raise ConfigError(f"universe part {part.strip()!r} must look like key=value")
        key, value = (s.strip() for s in part.split("=", 1))
        if key == "ints":
            match = _RANGE.match(value)
            if not match:
                raise ConfigError(f"ints must be a range LO..HI, got {value!r}")
            low, high = int(match.group(1)), int(match.group(2))
            if low > high:
                raise ConfigError(f"empty integer range {value}")
            fields["ints"] = tuple(range(low, high + 1))
        elif key == "consts":
            fields["consts"] = tuple(c.strip() for c in value.split(",") if c.strip())
        elif key == "vars":
            fields["var_names"] = tuple(v.strip() for v in value.split(",") if v.strip())
        else:
            raise ConfigError(f"unknown universe part {key!r}")
    return Universe(**fields)


def parse_builtins(text: Optional[str]) -> Optional[Tuple[str, ...]]:
    if text is None:
        return None
    names = tuple(name.strip() for name in text.split(",") if name.strip())
    return names or None
