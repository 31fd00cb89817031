"""
Validation utilities for the CHR confluence checker
"""

import os
from typing import Dict

from utils.config import FORMATS, RunConfig


def validate_source_file(file_path: str, extension: str) -> Dict:
    """
    Validate a program or analysis-spec source file

    Args:
        file_path: Path to the file
        extension: Expected extension, ".chr" or ".cspec"

    Returns:
        Dict with validation results
    """
    if not file_path or not file_path.strip():
        return {
            "is_valid": False,
            "error": "No file path provided"
        }

    if not os.path.exists(file_path):
        return {
            "is_valid": False,
            "error": f"File does not exist: {file_path}"
        }

    if not file_path.lower().endswith(extension):
        return {
            "is_valid": False,
            "error": f"File must have the {extension} extension: {file_path}"
        }

    if not os.access(file_path, os.R_OK):
        return {
            "is_valid": False,
            "error": "File is not readable. Check permissions."
        }

    try:
        with open(file_path, encoding="utf-8") as handle:
            text = handle.read()
    except UnicodeDecodeError:
        return {
            "is_valid": False,
            "error": f"File is not valid UTF-8: {file_path}"
        }
    except OSError as e:
        return {
            "is_valid": False,
            "error": f"Cannot access file: {str(e)}"
        }

    # An empty program is a legitimate input; an empty spec is not
    if extension == ".cspec" and not text.strip():
        return {
            "is_valid": False,
            "error": "Analysis spec is empty"
        }

    return {
        "is_valid": True,
        "text": text,
        "file_path": file_path
    }


def validate_run_config(config: RunConfig) -> Dict:
    """
    Validate the numeric bounds and flag combinations of a run

    Args:
        config: Run configuration assembled by the CLI

    Returns:
        Dict with validation results
    """
    if config.fuel <= 0 or config.object_fuel <= 0:
        return {
            "is_valid": False,
            "error": "Fuel must be positive"
        }

    if config.split_budget < 0:
        return {
            "is_valid": False,
            "error": "Split budget cannot be negative"
        }

    if config.jobs < 1:
        return {
            "is_valid": False,
            "error": "Jobs must be at least 1"
        }

    if config.modulo_equivalence and config.invariant_only:
        return {
            "is_valid": False,
            "error": "--modulo-equivalence and --invariant-only exclude each other"
        }

    if config.output_format not in FORMATS:
        return {
            "is_valid": False,
            "error": f"Unknown output format {config.output_format}"
        }

    return {
        "is_valid": True
    }
