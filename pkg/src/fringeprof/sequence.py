"""Time-overlapping projection schedule and per-group assembly.

Every projection group carries three sinusoids and one Gray pattern,
``S1 S2 S3 G_c`` with ``c`` cycling through the Gray bits. A group ``j`` is
reconstructed from its own sinusoids plus the most recent copy of every Gray
bit, so each Gray frame serves four consecutive reconstructions. Frame
indices are 0-based, group indices 1-based.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

__all__ = [
    "GROUP_SIZE",
    "BASELINE_GROUP_SIZE",
    "WarmupError",
    "Frame",
    "Schedule",
    "GroupAssembly",
    "make_schedule",
    "assemble",
    "Assembler",
    "throughput_report",
    "group_of",
    "write_manifest",
    "read_manifest",
]

GROUP_SIZE = 4
BASELINE_GROUP_SIZE = 7


class WarmupError(LookupError):
    """The stream does not yet hold a complete Gray set for this group."""


@dataclass(frozen=True)
class Frame:
    """One captured frame of the stream; `data` is a raster or a file path."""

    index: int
    role: str
    data: Any = field(default=None, repr=False, compare=False)

    @property
    def group(self):
        return group_of(self.index)


def group_of(index, group_size=GROUP_SIZE):
    return index // group_size + 1


@dataclass(frozen=True)
class Schedule:
    entries: tuple
    n_bits: int = 4
    group_size: int = GROUP_SIZE

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def n_groups(self):
        return len(self.entries) // self.group_size


def make_schedule(n_groups, n_bits=4):
    """Projection order for `n_groups` groups: ``S1 S2 S3 G_((j-1) mod N + 1)``."""
    if n_groups < 1:
        raise ValueError(f"n_groups must be >= 1, got {n_groups}")
    if n_bits < 1:
        raise ValueError(f"n_bits must be >= 1, got {n_bits}")
    entries = []
    for j in range(1, n_groups + 1):
        entries.extend(("S1", "S2", "S3", f"G{(j - 1) % n_bits + 1}"))
    return Schedule(entries=tuple(entries), n_bits=n_bits)


@dataclass(frozen=True)
class GroupAssembly:
    """Inputs for one reconstruction.

    ``staleness[b]`` is ``j`` minus the group that supplied Gray bit ``b``:
    0..3 for causal assembly, possibly negative for centered assembly.
    """

    group_index: int
    sinusoids: tuple
    gray_frames: dict
    staleness: dict

    def gray_list(self):
        return [self.gray_frames[b] for b in sorted(self.gray_frames)]

    @property
    def last_index(self):
        frames = list(self.sinusoids) + list(self.gray_frames.values())
        return max(f.index for f in frames)


def _gray_bit(role):
    return int(role[1:]) if role.startswith("G") else None


def assemble(stream, j, n_bits=4, policy="causal"):
    """Assemble group `j` from a role-tagged frame stream.

    Parameters
    ----------
    stream : iterable of Frame
    j : int
        1-based group index.
    policy : {"causal", "centered"}
        ``"causal"`` takes, per bit, the latest frame at or before group `j`;
        ``"centered"`` takes the frame nearest to `j`, earlier on ties.
    """
    if policy not in ("causal", "centered"):
        raise ValueError(f"unknown assembly policy {policy!r}")
    frames = list(stream)
    sins = {}
    grays = {}
    for f in frames:
        g = f.group
        if g == j and f.role in ("S1", "S2", "S3"):
            sins[f.role] = f
        b = _gray_bit(f.role)
        if b is not None:
            grays.setdefault(b, []).append(f)
    if policy == "causal" and j < n_bits:
        raise WarmupError(f"group {j}: warm-up, first complete Gray window at group {n_bits}")
    missing = [r for r in ("S1", "S2", "S3") if r not in sins]
    if missing:
        raise LookupError(f"group {j}: sinusoid frames {missing} not in stream")
    chosen = {}
    for b in range(1, n_bits + 1):
        cands = grays.get(b, [])
        if policy == "causal":
            cands = [f for f in cands if f.group <= j]
            pick = max(cands, key=lambda f: f.index) if cands else None
        else:
            pick = min(cands, key=lambda f: (abs(f.group - j), f.index)) if cands else None
        if pick is None:
            raise WarmupError(f"group {j}: Gray bit G{b} not yet available")
        chosen[b] = pick
    return GroupAssembly(
        group_index=j,
        sinusoids=(sins["S1"], sins["S2"], sins["S3"]),
        gray_frames=chosen,
        staleness={b: j - f.group for b, f in chosen.items()},
    )


class Assembler:
    """Streaming causal assembler.

    Feed frames in index order with :meth:`push`; it returns a
    :class:`GroupAssembly` whenever a group completes after warm-up, else None.
    """

    def __init__(self, n_bits=4):
        self.n_bits = n_bits
        self._latest_gray = {}
        self._current = {}
        self._group = None
        self.emitted = 0

    def push(self, frame) -> Optional[GroupAssembly]:
        g = frame.group
        if self._group != g:
            self._group = g
            self._current = {}
        b = _gray_bit(frame.role)
        if b is not None:
            self._latest_gray[b] = frame
        else:
            self._current[frame.role] = frame
        done = len(self._current) == 3 and (frame.index + 1) % GROUP_SIZE == 0
        if not done or len(self._latest_gray) < self.n_bits:
            return None
        self.emitted += 1
        return GroupAssembly(
            group_index=g,
            sinusoids=(self._current["S1"], self._current["S2"], self._current["S3"]),
            gray_frames=dict(sorted(self._latest_gray.items())),
            staleness={k: g - f.group for k, f in sorted(self._latest_gray.items())},
        )


def throughput_report(n_frames, rate_hz, group_size=GROUP_SIZE, n_bits=4):
    """Reconstructed frame count and rate for a stream of `n_frames` frames.

    With time-overlapping groups of 4 the first ``n_bits - 1`` groups are
    warm-up; the non-overlapping baseline (groups of ``3 + n_bits``) has none.
    """
    if not rate_hz > 0:
        raise ValueError(f"rate_hz must be > 0, got {rate_hz}")
    groups = n_frames // group_size
    if group_size == GROUP_SIZE:
        frames_out = max(groups - (n_bits - 1), 0)
    else:
        frames_out = groups
    return frames_out, rate_hz / group_size


def write_manifest(path, frames, header=None):
    """Write ``index role source-file`` lines, preceded by ``# key = value`` lines."""
    lines = [f"# {k} = {v}" for k, v in (header or {}).items()]
    lines.extend(f"{f.index} {f.role} {f.data}" for f in frames)
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path):
    """Parse a frame manifest; returns ``(frames, header)``.

    Source files are resolved relative to the manifest's directory.
    """
    path = Path(path)
    frames, header = [], {}
    for n, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if sep:
                header[key.strip()] = value.strip()
            continue
        parts = line.split(maxsplit=2)
        if len(parts) != 3 or not parts[0].isdigit():
            raise ValueError(f"{path}:{n}: expected 'index role source-file', got {raw!r}")
        frames.append(Frame(int(parts[0]), parts[1], path.parent / parts[2]))
    return frames, header
