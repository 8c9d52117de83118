"""Synthetic dual-channel leakage generator.

Each instruction owns a deterministic per-channel mean signature sampled
from a band-limited harmonic series over its two-cycle window (fetch
cycle then execute cycle). An observed window is

    signature(target)
    + bleed * signature(previous instruction, one cycle ahead)
    + bleed * signature(next instruction, one cycle behind)
    + per-index Gaussian noise
    + per-window Gaussian baseline wander (one DC draw per channel)
    + per-session DC offset on each channel,

so class-conditional sample distributions are Gaussian up to the small
discrete neighbor mixture. The wander term gives the within-class
covariance a common-mode component, the way scope baselines drift
between captures; without it a boot offset would sit in a direction the
classifier has never seen vary and recognition would collapse instead
of dip. Pipeline overlap is two-stage: the previous
instruction executes while the target fetches, and the next one fetches
while the target executes, which is where the bleed terms land.

Group structure is injected by giving every instruction of a group a
shared signature component on top of its own, so instructions of one
group resemble each other more than instructions across groups.

Channel character is set by ``layout``:

* ``default``: both channels informative everywhere, power weighted
  toward the execute half and EM toward the fetch half (smooth
  envelopes, overlapping information).
* ``complementary``: each probe couples strongly to a narrow stretch at
  one end of the window and only weakly elsewhere, so the informative
  index sets are nearly disjoint and neither channel alone supports a
  wide feature set.
* ``copy``: EM mirrors power exactly, including noise and offsets.

A boot session draws one DC offset per channel; ``reboot`` produces the
next session with freshly drawn offsets, emulating re-powering the
target between captures.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDataset, UnknownInstruction
from .rng import child_rng
from .tracekit import DualTrace, LabeledDataset

# AVR instruction grouping: arithmetic/logic on registers, immediate
# forms, single-register ops, branches and jumps, loads, program-memory
# loads, status-flag ops, and bit-level ops.
AVR_GROUPS: tuple[tuple[str, ...], ...] = (
    ("ADC", "ADD", "AND", "CP", "CPC", "CPSE", "EOR", "MOV", "MOVW",
     "OR", "SBC", "SUB"),
    ("ADIW", "ANDI", "CBR", "CPI", "LDI", "ORI", "SBCI", "SBIW", "SBR",
     "SUBI"),
    ("ASR", "CLR", "COM", "DEC", "INC", "LSL", "LSR", "NEG", "ROL",
     "ROR", "SER", "SWAP", "TST"),
    ("BRCC", "BRCS", "BREQ", "BRGE", "BRHC", "BRHS", "BRLO", "BRLT",
     "BRMI", "BRNE", "BRPL", "BRSH", "BRTC", "BRTS", "BRVC", "BRVS",
     "CALL", "JMP", "RCALL", "RJMP"),
    ("LD", "LDD", "LDS"),
    ("LPM", "ELPM"),
    ("CLC", "CLN", "CLS", "CLT", "CLV", "CLZ", "SEC", "SEH", "SEI",
     "SEN", "SES", "SET", "SEV", "SEZ"),
    ("BCLR", "BLD", "BRBC", "BRBS", "BSET", "BST", "CBI", "SBI", "SBIC",
     "SBIS", "SBRC", "SBRS"),
)

_NOP = "NOP"  # pipeline filler between template windows, not a class

LAYOUTS = ("default", "complementary", "copy")

# complementary layout: samples of strong coupling per probe, and the
# crosstalk level everywhere else
_BUMP_SAMPLES = 8
_BUMP_FLOOR = 0.2


@dataclass(frozen=True)
class GroupTable:
    """Ordered instruction groups; flattening fixes the label order used
    in datasets, models, and confusion matrices."""

    groups: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        groups = tuple(tuple(g) for g in self.groups)
        flat = [m for g in groups for m in g]
        if len(set(flat)) != len(flat):
            raise ValueError("duplicate mnemonic across groups")
        if not groups or any(len(g) == 0 for g in groups):
            raise ValueError("groups must be non-empty")
        object.__setattr__(self, "groups", groups)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(m for g in self.groups for m in g)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(g) for g in self.groups)

    def group_of(self, instr: str) -> int:
        """1-based group id of a mnemonic."""
        for gid, members in enumerate(self.groups, start=1):
            if instr in members:
                return gid
        raise UnknownInstruction(instr)

    def label_groups(self) -> tuple[int, ...]:
        return tuple(gid for gid, g in enumerate(self.groups, start=1)
                     for _ in g)


AVR_TABLE = GroupTable(AVR_GROUPS)


@dataclass(frozen=True)
class Session:
    """One boot of the target: a stable DC offset per channel."""

    session_id: int
    power_offset: float
    em_offset: float
    seed: int

    @classmethod
    def initial(cls, seed: int) -> "Session":
        """Reference boot; offsets define the zero point of the scale."""
        return cls(0, 0.0, 0.0, int(seed))

    @property
    def offsets(self) -> np.ndarray:
        return np.array([self.power_offset, self.em_offset])


def _harmonic_tables(t: np.ndarray, n_harmonics: int):
    """Cos/sin tables for harmonics of the two-cycle window at grid t."""
    h = np.arange(1, n_harmonics + 1)[:, None]
    arg = math.pi * h * t[None, :]
    return np.cos(arg), np.sin(arg)


@dataclass(frozen=True)
class LeakModel:
    """Frozen signature and noise tables for one synthetic target.

    ``sig`` holds per-instruction mean signatures on the window grid;
    ``prev_bleed`` and ``next_bleed`` hold the same analytic signatures
    evaluated one cycle ahead/behind and masked to the half-window where
    a neighbor overlaps. Row order matches ``labels`` with one extra
    trailing row for the NOP filler.
    """

    table: GroupTable
    window: int
    seed: int
    sig: np.ndarray          # (n+1, 2, w)
    prev_bleed: np.ndarray   # (n+1, 2, w)
    next_bleed: np.ndarray   # (n+1, 2, w)
    noise: np.ndarray        # (2, w) per-index sigma, >= 0
    dc_wander: np.ndarray    # (2,) std of per-window baseline jitter
    offset_spread: np.ndarray  # (2,) std of per-boot DC offsets
    bleed: float
    layout: str

    @property
    def labels(self) -> tuple[str, ...]:
        return self.table.labels

    @property
    def n_classes(self) -> int:
        return len(self.table.labels)

    @property
    def points_per_cycle(self) -> float:
        return self.window / 2.0

    @property
    def mirror_em(self) -> bool:
        return self.layout == "copy"

    def label_index(self, instr: str) -> int:
        try:
            return self.labels.index(instr)
        except ValueError:
            raise UnknownInstruction(instr) from None

    @classmethod
    def synthetic(cls, table: GroupTable = AVR_TABLE, *, window: int = 315,
                  seed: int = 1, noise_sigma=0.04, dc_wander=0.03,
                  offset_spread=0.05,
                  bleed: float = 0.25, layout: str = "default",
                  base_amp: float = 0.16, group_amp: float = 0.05,
                  instr_amp: float = 0.022, dev_harmonics: int = 24,
                  base_harmonics: int = 6,
                  private_frac: float = 0.0) -> "LeakModel":
        """Draw a deterministic synthetic target.

        ``noise_sigma``, ``dc_wander`` and ``offset_spread`` accept a
        scalar or a (power, em) pair, in raw trace units where full
        scale is about 1. ``dc_wander`` is the baseline jitter between
        consecutive windows of one session; keep it of the same order as
        ``offset_spread`` or boot offsets land outside anything seen in
        training.
        ``dev_harmonics`` bounds the bandwidth of the class-dependent
        components: above roughly ``dev_harmonics`` samples per cycle the
        sampled signatures carry no additional information.
        ``private_frac`` is the share of deviation variance each channel
        keeps to itself; the rest is the shared switching activity both
        probes observe through their own envelopes.
        """
        if layout not in LAYOUTS:
            raise ValueError(f"layout must be one of {LAYOUTS}")
        if window < 2:
            raise ValueError("window must cover both pipeline halves")
        labels = table.labels
        n = len(labels)
        gids = np.asarray(table.label_groups(), dtype=np.int64)

        rng = child_rng(seed, "signatures")
        base_c = rng.normal(size=(2, base_harmonics, 2))
        # class-dependent switching activity is one signal observed by
        # both probes: shared blocks [half, entity, harmonic, cos/sin]
        # carry most of the deviation energy, per-channel private blocks
        # [channel, half, entity, harmonic, cos/sin] the rest; fetch and
        # execute halves are drawn independently
        gshare_c = rng.normal(size=(2, table.n_groups, dev_harmonics, 2))
        ishare_c = rng.normal(size=(2, n + 1, dev_harmonics, 2))
        gpriv_c = rng.normal(size=(2, 2, table.n_groups, dev_harmonics, 2))
        ipriv_c = rng.normal(size=(2, 2, n + 1, dev_harmonics, 2))
        if layout == "copy":
            base_c[1] = base_c[0]
            gpriv_c[1] = gpriv_c[0]
            ipriv_c[1] = ipriv_c[0]
        w_shared = math.sqrt(1.0 - private_frac)
        w_priv = math.sqrt(private_frac)

        def sample(tgrid: np.ndarray, mask: np.ndarray) -> np.ndarray:
            """(n+1, 2, len(t)) signatures on an arbitrary cycle grid."""
            cb, sb = _harmonic_tables(tgrid, base_harmonics)
            cd, sd = _harmonic_tables(tgrid, dev_harmonics)
            execute = ((tgrid % 2.0) >= 1.0).astype(float)
            halves = (1.0 - execute, execute)
            out = np.empty((n + 1, 2, tgrid.size))
            for ch in range(2):
                base = 0.5 + (base_amp / math.sqrt(base_harmonics)) * (
                    base_c[ch, :, 0] @ cb + base_c[ch, :, 1] @ sb)
                genv = _envelope(tgrid, ch, layout)
                gdev = np.zeros((table.n_groups, tgrid.size))
                idev = np.zeros((n + 1, tgrid.size))
                for h, hmask in enumerate(halves):
                    gs = gshare_c[h, :, :, 0] @ cd + gshare_c[h, :, :, 1] @ sd
                    gp = gpriv_c[ch, h, :, :, 0] @ cd + \
                        gpriv_c[ch, h, :, :, 1] @ sd
                    gdev += hmask * (w_shared * gs + w_priv * gp)
                    ish = ishare_c[h, :, :, 0] @ cd + ishare_c[h, :, :, 1] @ sd
                    ip = ipriv_c[ch, h, :, :, 0] @ cd + \
                        ipriv_c[ch, h, :, :, 1] @ sd
                    idev += hmask * (w_shared * ish + w_priv * ip)
                gdev *= group_amp / math.sqrt(dev_harmonics)
                idev *= instr_amp / math.sqrt(dev_harmonics)
                # group rows are 1-based; NOP (last row) gets no group part
                dev = idev.copy()
                dev[:n] += gdev[gids - 1]
                out[:, ch, :] = (base[None, :] + dev * genv[None, :])
            return out * mask[None, None, :]

        t = (np.arange(window) + 0.5) * (2.0 / window)
        ones = np.ones(window)
        sig = sample(t, ones)
        prev = sample(t + 1.0, (t < 1.0).astype(float))
        nxt = sample(t - 1.0, (t >= 1.0).astype(float))

        noise_pair = np.broadcast_to(
            np.asarray(noise_sigma, dtype=np.float64), (2,)).copy()
        wander_pair = np.broadcast_to(
            np.asarray(dc_wander, dtype=np.float64), (2,)).copy()
        if np.any(noise_pair < 0) or np.any(wander_pair < 0):
            raise ValueError("noise sigma must be nonnegative")
        spread_pair = np.broadcast_to(
            np.asarray(offset_spread, dtype=np.float64), (2,)).copy()
        if layout == "copy":
            noise_pair[1] = noise_pair[0]
            wander_pair[1] = wander_pair[0]
            spread_pair[1] = spread_pair[0]
        noise = np.repeat(noise_pair[:, None], window, axis=1)

        return cls(table, window, int(seed), sig, prev, nxt, noise,
                   wander_pair, spread_pair, float(bleed), layout)


def _envelope(t: np.ndarray, channel: int, layout: str) -> np.ndarray:
    """Channel weighting of class-dependent components over the window.

    Power leans toward the execute half, EM toward fetch. The
    complementary layout instead gives each probe a narrow high-coupling
    stretch at opposite ends of the window (a handful of samples each,
    weak crosstalk elsewhere), so the informative index sets are close
    to disjoint and neither channel alone can feed a wide feature set.
    The copy layout gives EM the power envelope so the channels
    coincide exactly.
    """
    if layout == "copy":
        channel = 0
    if layout == "complementary":
        # span is in cycle units; t.size is the sample count of the
        # window grid, two cycles long
        span = 2.0 * _BUMP_SAMPLES / t.size
        u = np.mod(t, 2.0)
        out = np.full(t.shape, _BUMP_FLOOR)
        if channel == 0:
            out[u < span] = 1.0
        else:
            out[u >= 2.0 - span] = 1.0
        return out
    mid, amp = 0.65, 0.35
    sway = amp * np.cos(math.pi * t)
    return mid - sway if channel == 0 else mid + sway


def reboot(session: Session, model: LeakModel) -> Session:
    """Next boot session: same target, freshly drawn DC offsets.

    Each channel's front end settles into one of two bias states at the
    full spread magnitude rather than wandering near zero, and residual
    charge keeps consecutive boots from landing in the same pair of
    states. Marginally the offsets have mean zero and std equal to the
    spread, but every reboot is guaranteed to actually move the baseline,
    which is the point of rebooting at all.
    """
    new_id = session.session_id + 1
    rng = child_rng(session.seed, "boot", new_id)
    prev = session.offsets
    if np.all(prev == 0.0):
        signs = np.where(rng.random(2) < 0.5, -1.0, 1.0)
        if model.mirror_em:
            signs[1] = signs[0]
    elif model.mirror_em:
        # mirrored channels share one sign, so only two states exist
        signs = -np.sign(prev)
    else:
        ps = (float(np.sign(prev[0])), float(np.sign(prev[1])))
        opts = [(a, b) for a in (-1.0, 1.0) for b in (-1.0, 1.0)
                if (a, b) != ps]
        signs = np.asarray(opts[int(rng.integers(3))])
    off = signs * model.offset_spread
    return Session(new_id, float(off[0]), float(off[1]), session.seed)


def _compose(model: LeakModel, target_idx, prev_idx, next_idx, rng,
             session: Session) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized window synthesis; index args are aligned int arrays."""
    m = len(target_idx)
    out = (model.sig[target_idx]
           + model.bleed * model.prev_bleed[prev_idx]
           + model.bleed * model.next_bleed[next_idx])
    noise = rng.normal(0.0, 1.0, size=(m, 2, model.window)) * model.noise
    if model.mirror_em:
        noise[:, 1, :] = noise[:, 0, :]
    out = out + noise
    if np.any(model.dc_wander > 0):
        # drawn only when active so zero-wander streams stay byte-stable
        wander = rng.normal(0.0, 1.0, size=(m, 2)) * model.dc_wander
        if model.mirror_em:
            wander[:, 1] = wander[:, 0]
        out += wander[:, :, None]
    out[:, 0, :] += session.power_offset
    out[:, 1, :] += session.em_offset
    return out[:, 0, :], out[:, 1, :]


def gen_template_trace(instr: str, session: Session, model: LeakModel,
                       rng: np.random.Generator | None = None, *,
                       prev: str | None = None,
                       next: str | None = None) -> DualTrace:
    """One template window: the target sandwiched between two filler
    instructions, drawn uniformly from the alphabet unless pinned.

    Without an explicit ``rng`` the draw is a pure function of
    (model, session, instr), so repeated calls return the same trace.
    """
    ti = model.label_index(instr)
    if rng is None:
        rng = child_rng(model.seed, "template-one", session.seed,
                        session.session_id, ti)
    n = model.n_classes
    pi = model.label_index(prev) if prev is not None else int(rng.integers(n))
    ni = model.label_index(next) if next is not None else int(rng.integers(n))
    p, e = _compose(model, np.array([ti]), np.array([pi]), np.array([ni]),
                    rng, session)
    return DualTrace(p[0], e[0])


def gen_dataset(instrs, n_per_class: int, session: Session,
                model: LeakModel) -> LabeledDataset:
    """Template captures: ``n_per_class`` windows for every requested
    mnemonic, neighbors drawn uniformly from the full alphabet.

    Labels are canonicalized to grouping-table order; priors come out
    uniform by construction.
    """
    if n_per_class < 1:
        raise EmptyDataset("n_per_class must be at least 1")
    wanted = list(instrs)
    if not wanted:
        raise EmptyDataset("no instructions requested")
    for m in wanted:
        if m not in model.labels:
            raise UnknownInstruction(m)
    ordered = [m for m in model.labels if m in set(wanted)]
    ids = [model.label_index(m) for m in ordered]
    n_alpha = model.n_classes

    blocks_p, blocks_e, blocks_i = [], [], []
    for local, ti in enumerate(ids):
        rng = child_rng(model.seed, "template", session.seed,
                        session.session_id, ti)
        prev_idx = rng.integers(0, n_alpha, size=n_per_class)
        next_idx = rng.integers(0, n_alpha, size=n_per_class)
        tgt = np.full(n_per_class, ti)
        p, e = _compose(model, tgt, prev_idx, next_idx, rng, session)
        blocks_p.append(p.astype(np.float32))
        blocks_e.append(e.astype(np.float32))
        blocks_i.append(np.full(n_per_class, local, dtype=np.int32))

    power = np.concatenate(blocks_p)
    em = np.concatenate(blocks_e)
    instr_ids = np.concatenate(blocks_i)
    sessions = np.full(power.shape[0], session.session_id, dtype=np.int64)
    groups = tuple(model.table.group_of(m) for m in ordered)
    return LabeledDataset.from_arrays(power, em, instr_ids, sessions,
                                      tuple(ordered), groups)


def gen_benchmark(program, session: Session, model: LeakModel, *,
                  stream_key: int | str = 0) -> LabeledDataset:
    """One window per program instruction, in order, with bleed from the
    actual neighbors; NOP pads both ends of the sequence.

    ``stream_key`` separates independent draws of the same program within
    one session (distinct evaluation and adaptation segments).
    """
    seq = [model.label_index(m) for m in program]
    if not seq:
        raise EmptyDataset("empty program")
    idx = np.asarray(seq, dtype=np.int64)
    nop = model.n_classes  # trailing signature row
    prev_idx = np.concatenate(([nop], idx[:-1]))
    next_idx = np.concatenate((idx[1:], [nop]))
    rng = child_rng(model.seed, "bench", session.seed, session.session_id,
                    stream_key)
    p, e = _compose(model, idx, prev_idx, next_idx, rng, session)

    labels = model.labels
    present = sorted(set(seq))
    local_of = {g: i for i, g in enumerate(present)}
    instr_ids = np.array([local_of[v] for v in seq], dtype=np.int32)
    named = tuple(labels[v] for v in present)
    groups = tuple(model.table.group_of(m) for m in named)
    sessions = np.full(idx.size, session.session_id, dtype=np.int64)
    return LabeledDataset.from_arrays(p.astype(np.float32),
                                      e.astype(np.float32),
                                      instr_ids, sessions, named, groups)


# Synthetic stand-ins for the evaluation programs; lengths follow the
# cycle counts of the originals (one window per cycle).
BENCHMARK_LENGTHS = {
    "timeloop": 1400,
    "matrix": 1000,
    "decimaldivision": 1200,
    "decimal2float": 1000,
    "ascii": 2000,
    "adconverter": 1400,
}


def make_program(name: str, model: LeakModel, *,
                 length: int | None = None) -> tuple[str, ...]:
    """Deterministic benchmark stand-in: a small loop body repeated until
    the program reaches its nominal length.

    The body draws from a narrow, rank-skewed instruction alphabet the way
    tight firmware loops do: a handful of opcodes dominated by the inner
    loop, not a uniform sample of the whole set. That mix is what makes
    on-line adaptation meaningful; a batch of a few hundred windows then
    revisits each present opcode dozens of times instead of touching most
    of the set once.
    """
    key = name.lower()
    if length is None:
        if key not in BENCHMARK_LENGTHS:
            raise UnknownInstruction(
                f"unknown benchmark {name!r}; pick from "
                f"{sorted(BENCHMARK_LENGTHS)} or give length=")
        length = BENCHMARK_LENGTHS[key]
    rng = child_rng(model.seed, "program", key)
    labels = model.labels
    alphabet = rng.choice(len(labels), size=12, replace=False)
    # inner-loop skew: opcode frequency falls off roughly as 1/rank
    weights = 1.0 / (1.0 + np.arange(alphabet.size))
    weights /= weights.sum()
    body = [labels[int(alphabet[int(i)])]
            for i in rng.choice(alphabet.size, size=24, p=weights)]
    reps = -(-length // len(body))
    return tuple((body * reps)[:length])
