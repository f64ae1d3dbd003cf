"""
Benchmark trace files

A trace is CSV preceded by '#'-prefixed header lines of the form
`# key: <json value>`, so any CSV reader that skips comments can plot it.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import pandas as pd

from .errors import InvalidData
from .optimizer import TraceRecord

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ('algorithm', 'k', 'excess_risk_at_avg', 'excess_risk_at_last', 'wall_ns')

# rounding slack for excess-risk values that should be >= 0
NEGATIVE_TOLERANCE = 1e-12


@dataclass
class TraceFile:
    header: Dict[str, Any]
    records: List[TraceRecord] = field(default_factory=list)

    def validate(self) -> None:
        """k strictly increasing per algorithm; excess-risk values finite and >= -1e-12"""
        last_k: Dict[str, int] = {}
        for r in self.records:
            if r.k <= last_k.get(r.algorithm, 0):
                raise InvalidData(f"Trace for {r.algorithm} is not strictly increasing in k at k={r.k}")
            last_k[r.algorithm] = r.k
            for value in (r.excess_risk_avg, r.excess_risk_last):
                if not math.isfinite(value) or value < -NEGATIVE_TOLERANCE:
                    raise InvalidData(f"Invalid excess risk {value} for {r.algorithm} at k={r.k}")

    def algorithms(self) -> List[str]:
        return list(dict.fromkeys(r.algorithm for r in self.records))

    def for_algorithm(self, algorithm: str) -> List[TraceRecord]:
        return [r for r in self.records if r.algorithm == algorithm]


def write_trace(path: Union[str, Path], header: Dict[str, Any], records: Sequence[TraceRecord]) -> Path:
    """
    Write a validated trace

    Args:
        path: Output CSV path
        header: Echoed config, reference convention, seed, ...
        records: Trace rows, grouped per algorithm in k order

    Returns:
        The written path
    """
    trace = TraceFile(dict(header), list(records))
    trace.validate()
    frame = pd.DataFrame(
        [(r.algorithm, r.k, r.excess_risk_avg, r.excess_risk_last, r.wall_ns) for r in trace.records],
        columns=list(TRACE_COLUMNS),
    )
    path = Path(path)
    with open(path, 'w', newline='') as f:
        for key in sorted(trace.header):
            f.write(f"# {key}: {json.dumps(trace.header[key], sort_keys=True)}\n")
        frame.to_csv(f, index=False, float_format='%.17g')
    logger.debug(f"Wrote {len(trace.records)} trace records to {path}")
    return path


def read_trace(path: Union[str, Path]) -> TraceFile:
    """Parse a file written by write_trace"""
    path = Path(path)
    header: Dict[str, Any] = {}
    try:
        with open(path, 'r') as f:
            for line in f:
                if not line.startswith('#'):
                    break
                key, _, value = line[1:].strip().partition(': ')
                header[key] = json.loads(value)
    except FileNotFoundError:
        raise InvalidData(f"Trace file not found: {path}")
    except json.JSONDecodeError as e:
        raise InvalidData(f"Malformed trace header in {path}: {e}") from e

    frame = pd.read_csv(path, comment='#', float_precision='round_trip')
    if tuple(frame.columns) != TRACE_COLUMNS:
        raise InvalidData(f"{path} has columns {list(frame.columns)}, expected {list(TRACE_COLUMNS)}")
    seed = int(header.get('seed', 0))
    records = [
        TraceRecord(algorithm=str(row.algorithm), k=int(row.k),
                    excess_risk_avg=float(row.excess_risk_at_avg),
                    excess_risk_last=float(row.excess_risk_at_last),
                    wall_ns=int(row.wall_ns), seed=seed)
        for row in frame.itertuples(index=False)
    ]
    trace = TraceFile(header, records)
    trace.validate()
    return trace
