"""
Resumable per-sequence state: one JSON object per line, rewritten atomically.
"""

import json
import logging
import os
import tempfile
from typing import Dict, Iterable

from src.errors import ParseError
from src.models.supervision import SequenceState

logger = logging.getLogger(__name__)


def load_states(path: str) -> Dict[str, SequenceState]:
    """States keyed by sequence id; a missing file is an empty store."""
    if not os.path.exists(path):
        return {}

    states: Dict[str, SequenceState] = {}
    with open(path, encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                state = SequenceState.from_dict(json.loads(line))
            except (ValueError, KeyError, TypeError) as e:
                raise ParseError(f"invalid state record: {e}", line=number, path=path)
            if state.sequence_id in states:
                raise ParseError(f"duplicate sequence '{state.sequence_id}'", line=number, path=path)
            states[state.sequence_id] = state
    logger.debug("Loaded %d sequence states from %s", len(states), path)
    return states


def save_states(path: str, states: Iterable[SequenceState]):
    """Replace the state file with the given states, ordered by sequence id."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)

    ordered = sorted(states, key=lambda s: s.sequence_id)
    fd, tmp_path = tempfile.mkstemp(prefix=".camh_state_", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            for state in ordered:
                f.write(json.dumps(state.to_dict(), sort_keys=True) + "\n")
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    logger.debug("Saved %d sequence states to %s", len(ordered), path)
