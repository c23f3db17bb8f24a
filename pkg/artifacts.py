"""
CSV and JSON artifact writers shared by the runner and the acceptance suites.

Every CSV starts with '#' comment lines echoing the resolved configuration,
followed by the column row. Floats are written with 17 significant digits so
identical configurations give byte-identical files.
"""

import csv
import json
from pathlib import Path

import yaml

from toeplitz_lab import format_value

JSON_SCHEMA_VERSION = 1


def format_cell(value):
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, str):
        return value
    return format_value(value)


def config_header(config):
    """The configuration as '# '-prefixed YAML lines."""
    text = yaml.dump(config, default_flow_style=False, sort_keys=False)
    return [f"# {line}" for line in text.rstrip('\n').split('\n')]


def write_csv(path, columns, rows, config):
    """Write rows (mappings keyed by column name) below the config header.

    Returns:
        Path of the written file
    """
    path = Path(path)
    with open(path, 'w', newline='') as handle:
        for line in config_header(config):
            handle.write(line + '\n')
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_cell(row.get(column)) for column in columns])
    return path


def write_json(path, data):
    path = Path(path)
    path.write_text(json.dumps(data, indent=2) + '\n')
    return path


def sidecar(path, suffix):
    """foo.csv -> foo<suffix>, next to the main artifact."""
    path = Path(path)
    return path.with_name(path.stem + suffix)
