"""Data model for deep resistive networks.

A network has L+1 layers of nodes. Layer 0 holds the pinned input potentials,
layers 1..L-1 are hidden, layer L is the linear output layer.

Node layout (fixed, derived from the widths alone):

* input and hidden layers: nodes 0 and 1 are the bias pair, pinned at
  +gain and -gain of the layer; the remaining nodes come in
  (excitatory, inhibitory) pairs at indices (2k, 2k+1).
* output layer: every node is a free linear unit.

Couplings are resistor conductances between consecutive layers; each hidden
or output unit may also carry a leak conductance to ground. Conductances are
non-negative; there are no resistors into bias nodes (columns 0 and 1 of a
hidden coupling matrix are structurally zero).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionError, FormatError, IsolatedNodeError

# polarity labels
BIAS_POS = "bias+"
BIAS_NEG = "bias-"
INPUT = "input"
EXCITATORY = "exc"
INHIBITORY = "inh"
LINEAR = "lin"

VCVS = "input-vcvs"
BIDIRECTIONAL = "bidirectional"

NETLIST_VERSION = 1


def unit_polarities(widths) -> tuple[tuple[str, ...], ...]:
    """Node polarity layout as a pure function of the layer widths.

    Input layer: bias pair then paired input nodes. Hidden layers: bias pair
    then alternating excitatory (even index) / inhibitory (odd index) units.
    Output layer: all linear.
    """
    widths = tuple(int(n) for n in widths)
    layout = []
    last = len(widths) - 1
    for l, n in enumerate(widths):
        if l == last:
            layout.append((LINEAR,) * n)
        elif l == 0:
            layout.append((BIAS_POS, BIAS_NEG) + (INPUT,) * (n - 2))
        else:
            units = [BIAS_POS, BIAS_NEG]
            for k in range(2, n):
                units.append(EXCITATORY if k % 2 == 0 else INHIBITORY)
            layout.append(tuple(units))
    return tuple(layout)


def _frozen(arr) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class DrnParams:
    """Immutable parameters of a deep resistive network.

    couplings[l] is the conductance matrix between layer l and layer l+1,
    shape (widths[l], widths[l+1]). leaks[l] holds the leak conductances of
    layer l+1's units. gains[l] is the bias-pair pin magnitude of layer l
    (for the input layer this is the input amplification factor).
    amp_gains, present only in bidirectional-amplifier mode, holds the
    per-layer amplifier gains a(1)..a(L).
    """

    couplings: tuple[np.ndarray, ...]
    leaks: tuple[np.ndarray, ...]
    gains: tuple[float, ...]
    leaks_enabled: bool = True
    amplifier_mode: str = VCVS
    amp_gains: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.couplings:
            raise DimensionError("need at least one coupling matrix")
        object.__setattr__(self, "couplings", tuple(_frozen(g) for g in self.couplings))
        object.__setattr__(self, "leaks", tuple(_frozen(k) for k in self.leaks))
        object.__setattr__(self, "gains", tuple(float(a) for a in self.gains))
        if self.amp_gains is not None:
            object.__setattr__(self, "amp_gains", tuple(float(a) for a in self.amp_gains))
        self._validate()

    @property
    def num_layers(self) -> int:
        return len(self.couplings)

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(g.shape[0] for g in self.couplings) + (self.couplings[-1].shape[1],)

    @property
    def num_inputs(self) -> int:
        """Number q of raw input values (input layer is 2q+2 wide)."""
        return (self.widths[0] - 2) // 2

    def _validate(self):
        L = self.num_layers
        widths = self.widths
        for l, n in enumerate(widths[:-1]):
            if n < 4 or n % 2 != 0:
                raise DimensionError(f"layer {l} width {n} invalid: input/hidden layers need an even width >= 4")
        if widths[-1] < 1:
            raise DimensionError("output layer needs at least one unit")
        if len(self.leaks) != L:
            raise DimensionError(f"need {L} leak vectors, got {len(self.leaks)}")
        if len(self.gains) != L:
            raise DimensionError(f"need {L} gains (layers 0..L-1), got {len(self.gains)}")
        for l in range(L):
            g = self.couplings[l]
            if l + 1 < L and g.shape[1] != widths[l + 1]:
                raise DimensionError(f"couplings[{l}] shape {g.shape} inconsistent with widths {widths}")
            if self.leaks[l].shape != (widths[l + 1],):
                raise DimensionError(f"leaks[{l}] has shape {self.leaks[l].shape}, expected ({widths[l + 1]},)")
            if not np.isfinite(g).all() or (g < 0).any():
                raise DimensionError(f"couplings[{l}] must be finite and non-negative")
            if not np.isfinite(self.leaks[l]).all() or (self.leaks[l] < 0).any():
                raise DimensionError(f"leaks[{l}] must be finite and non-negative")
            if l + 1 < L and g[:, :2].any():
                raise DimensionError(f"couplings[{l}] wires into bias nodes (columns 0,1 must be zero)")
            if l + 1 < L and self.leaks[l][:2].any():
                raise DimensionError(f"leaks[{l}] on bias nodes (entries 0,1 must be zero)")
        if any(a <= 0 for a in self.gains):
            raise DimensionError(f"gains must be positive, got {self.gains}")
        if self.amplifier_mode not in (VCVS, BIDIRECTIONAL):
            raise DimensionError(f"unknown amplifier mode {self.amplifier_mode!r}")
        if self.amplifier_mode == BIDIRECTIONAL:
            if self.amp_gains is None or len(self.amp_gains) != L:
                raise DimensionError(f"bidirectional mode needs {L} amplifier gains a(1)..a(L)")
            if any(a <= 0 for a in self.amp_gains):
                raise DimensionError("amplifier gains must be positive")
        elif self.amp_gains is not None:
            raise DimensionError("amp_gains only apply in bidirectional mode")
        for l in range(1, L + 1):
            d = self.total_conductance(l)
            start = 0 if l == L else 2
            if (d[start:] <= 0).any():
                k = start + int(np.argmax(d[start:] <= 0))
                raise IsolatedNodeError(f"unit {k} of layer {l} has zero total conductance")

    def total_conductance(self, l: int) -> np.ndarray:
        """Denominator of layer l's update: leak + fan-in + fan-out conductance."""
        d = self.leaks[l - 1] + self.couplings[l - 1].sum(axis=0)
        if l < self.num_layers:
            d = d + self.couplings[l].sum(axis=1)
        return d

    def polarities(self) -> tuple[tuple[str, ...], ...]:
        return unit_polarities(self.widths)


@dataclass
class DrnState:
    """Node potentials for a batch: potentials[l] has shape (batch, widths[l])."""

    potentials: list[np.ndarray]

    @property
    def batch_size(self) -> int:
        return self.potentials[0].shape[0]

    @property
    def output(self) -> np.ndarray:
        return self.potentials[-1]

    def copy(self) -> "DrnState":
        return DrnState([v.copy() for v in self.potentials])


def encode_input(x, a0: float) -> np.ndarray:
    """Encode raw inputs as input-layer potentials.

    Node 0 is pinned at +a0, node 1 at -a0 (the bias pair); input k (1-based)
    drives the pair (2k, 2k+1) at +a0*x_k and -a0*x_k. Accepts a vector
    (length q) or a batch (batch, q) and returns the matching shape with
    2q+2 columns.
    """
    x = np.asarray(x, dtype=np.float64)
    if a0 <= 0:
        raise DimensionError(f"input gain must be positive, got {a0}")
    if not np.isfinite(x).all():
        raise DimensionError("input contains non-finite values")
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2:
        raise DimensionError(f"input must be a vector or a batch, got shape {x.shape}")
    b, q = x.shape
    out = np.empty((b, 2 * q + 2))
    out[:, 0] = a0
    out[:, 1] = -a0
    out[:, 2::2] = a0 * x
    out[:, 3::2] = -a0 * x
    return out[0] if single else out


def _draw_clipped(rng, shape, fan_in) -> np.ndarray:
    c = np.sqrt(1.0 / fan_in)
    return np.maximum(0.0, rng.uniform(-c, c, size=shape))


def random_drn(
    dims,
    seed,
    *,
    a0: float = 1.0,
    leaks_enabled: bool = False,
    leak_range: tuple[float, float] = (0.05, 0.5),
    amplifier_mode: str = VCVS,
    amp_gains=None,
) -> DrnParams:
    """Randomly initialized network for the given signal dims (q, m1, ..., r).

    Layer widths become (2q+2, 2*m+2, ..., r). Conductances between layers
    l and l+1 are max(0, h) with h ~ U(-c, c), c = sqrt(1/widths[l]); one
    seeded child stream per layer. Leaks are zero when leaks_enabled is
    False (the usual training configuration), otherwise drawn uniformly from
    leak_range so every unit is anchored to ground. If a drawn matrix would
    leave a unit with zero total conductance the layer streams keep drawing,
    so tiny networks stay valid without breaking determinism.

    The input bias pair is pinned at +/-a0; hidden bias pairs at +/-1.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise DimensionError(f"invalid dims {dims}")
    L = len(dims) - 1
    widths = tuple(2 * d + 2 for d in dims[:-1]) + (dims[-1],)
    children = np.random.SeedSequence(seed).spawn(L + 1)
    rngs = [np.random.default_rng(c) for c in children[:L]]
    leak_rng = np.random.default_rng(children[L])

    leaks = []
    for l in range(L):
        leak = np.zeros(widths[l + 1])
        if leaks_enabled:
            drawn = leak_rng.uniform(*leak_range, size=widths[l + 1])
            if l + 1 < L:
                leak[2:] = drawn[2:]
            else:
                leak[:] = drawn
        leaks.append(leak)

    def draw_all():
        couplings = []
        for l in range(L):
            g = _draw_clipped(rngs[l], (widths[l], widths[l + 1]), widths[l])
            if l + 1 < L:
                g[:, :2] = 0.0
            couplings.append(g)
        return couplings

    for _ in range(64):
        couplings = draw_all()
        ok = True
        for l in range(1, L + 1):
            d = leaks[l - 1] + couplings[l - 1].sum(axis=0)
            if l < L:
                d = d + couplings[l].sum(axis=1)
            start = 0 if l == L else 2
            if (d[start:] <= 0).any():
                ok = False
                break
        if ok:
            break
    else:
        raise IsolatedNodeError(f"could not draw a connected network for dims {dims}")

    gains = (float(a0),) + (1.0,) * (L - 1)
    return DrnParams(
        couplings=tuple(couplings),
        leaks=tuple(leaks),
        gains=gains,
        leaks_enabled=leaks_enabled,
        amplifier_mode=VCVS if amplifier_mode == VCVS else amplifier_mode,
        amp_gains=amp_gains,
    )


def with_couplings(params: DrnParams, couplings, leaks=None) -> DrnParams:
    """New params sharing every setting but the conductances."""
    return replace(
        params,
        couplings=tuple(couplings),
        leaks=params.leaks if leaks is None else tuple(leaks),
    )


# --- netlist serialization -------------------------------------------------
#
# Line-oriented text, format version 1. Lines, in emission order:
#   DRNNET 1                 header with format version
#   MODE input-vcvs|bidirectional
#   LEAKS on|off             whether leak conductances are model-enabled
#   LAYER l n                width of layer l
#   GAIN l value             bias/amplification gain of layer l (l < L)
#   AMPGAIN l value          bidirectional amplifier gain a(l), l in 1..L
#                            (emitted only in bidirectional mode)
#   VSRC l {0|1} value       bias-pair pin voltages (+gain, -gain)
#   DIODE l k exc|inh        hidden-unit diode orientation
#   R l j k g                coupling resistor between node j of layer l-1
#                            and node k of layer l (zeros omitted)
#   RLEAK l k g              leak resistor of unit k, layer l (zeros omitted)
#
# Floats are written with repr() and therefore round-trip bit-exactly.


def save_netlist(params: DrnParams, path):
    """Write the plain-text netlist (format above); lossless round-trip."""
    widths = params.widths
    L = params.num_layers
    lines = [f"DRNNET {NETLIST_VERSION}", f"MODE {params.amplifier_mode}",
             f"LEAKS {'on' if params.leaks_enabled else 'off'}"]
    for l, n in enumerate(widths):
        lines.append(f"LAYER {l} {n}")
    for l, a in enumerate(params.gains):
        lines.append(f"GAIN {l} {a!r}")
    if params.amp_gains is not None:
        for l, a in enumerate(params.amp_gains, start=1):
            lines.append(f"AMPGAIN {l} {a!r}")
    for l, a in enumerate(params.gains):
        lines.append(f"VSRC {l} 0 {a!r}")
        lines.append(f"VSRC {l} 1 {-a!r}")
    layout = params.polarities()
    for l in range(1, L):
        for k in range(2, widths[l]):
            lines.append(f"DIODE {l} {k} {layout[l][k]}")
    for l in range(1, L + 1):
        g = params.couplings[l - 1]
        for j, k in zip(*np.nonzero(g)):
            lines.append(f"R {l} {j} {k} {float(g[j, k])!r}")
        leak = params.leaks[l - 1]
        for (k,) in zip(*np.nonzero(leak)):
            lines.append(f"RLEAK {l} {k} {float(leak[k])!r}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_netlist(path) -> DrnParams:
    """Re-import a netlist written by save_netlist."""
    with open(path) as f:
        raw = [ln.strip() for ln in f]
    rows = [ln.split() for ln in raw if ln and not ln.startswith("#")]
    if not rows or rows[0][0] != "DRNNET":
        raise FormatError("line 1: expected 'DRNNET <version>' header")
    if int(rows[0][1]) != NETLIST_VERSION:
        raise FormatError(f"unsupported netlist version {rows[0][1]}")

    mode = VCVS
    leaks_enabled = True
    widths_map: dict[int, int] = {}
    gains_map: dict[int, float] = {}
    amp_map: dict[int, float] = {}
    vsrc = []
    diodes = []
    resistors = []
    rleaks = []
    for i, row in enumerate(rows[1:], start=2):
        kind = row[0]
        try:
            if kind == "MODE":
                mode = row[1]
            elif kind == "LEAKS":
                leaks_enabled = row[1] == "on"
            elif kind == "LAYER":
                widths_map[int(row[1])] = int(row[2])
            elif kind == "GAIN":
                gains_map[int(row[1])] = float(row[2])
            elif kind == "AMPGAIN":
                amp_map[int(row[1])] = float(row[2])
            elif kind == "VSRC":
                vsrc.append((int(row[1]), int(row[2]), float(row[3])))
            elif kind == "DIODE":
                diodes.append((int(row[1]), int(row[2]), row[3]))
            elif kind == "R":
                resistors.append((int(row[1]), int(row[2]), int(row[3]), float(row[4])))
            elif kind == "RLEAK":
                rleaks.append((int(row[1]), int(row[2]), float(row[3])))
            else:
                raise FormatError(f"line {i}: unknown record {kind!r}")
        except (ValueError, IndexError) as exc:
            raise FormatError(f"line {i}: malformed {kind} record: {raw[i - 1]!r}") from exc

    if not widths_map:
        raise FormatError("no LAYER records")
    L = max(widths_map)
    if sorted(widths_map) != list(range(L + 1)):
        raise FormatError("LAYER records must cover layers 0..L")
    widths = [widths_map[l] for l in range(L + 1)]
    if sorted(gains_map) != list(range(L)):
        raise FormatError("GAIN records must cover layers 0..L-1")
    gains = tuple(gains_map[l] for l in range(L))
    amp_gains = None
    if mode == BIDIRECTIONAL:
        if sorted(amp_map) != list(range(1, L + 1)):
            raise FormatError("bidirectional netlists need AMPGAIN for layers 1..L")
        amp_gains = tuple(amp_map[l] for l in range(1, L + 1))

    couplings = [np.zeros((widths[l], widths[l + 1])) for l in range(L)]
    leaks = [np.zeros(widths[l + 1]) for l in range(L)]
    for l, j, k, g in resistors:
        if not (1 <= l <= L) or j >= widths[l - 1] or k >= widths[l]:
            raise FormatError(f"R record out of range: layer {l} nodes {j},{k}")
        couplings[l - 1][j, k] = g
    for l, k, g in rleaks:
        if not (1 <= l <= L) or k >= widths[l]:
            raise FormatError(f"RLEAK record out of range: layer {l} node {k}")
        leaks[l - 1][k] = g

    for l, idx, v in vsrc:
        expected = gains[l] if idx == 0 else -gains[l]
        if v != expected:
            raise FormatError(f"VSRC {l} {idx} is {v!r}, inconsistent with GAIN {gains[l]!r}")
    layout = unit_polarities(widths)
    for l, k, pol in diodes:
        if layout[l][k] != {"exc": EXCITATORY, "inh": INHIBITORY}[pol]:
            raise FormatError(f"DIODE {l} {k} {pol} contradicts the derived layout")

    return DrnParams(
        couplings=tuple(couplings),
        leaks=tuple(leaks),
        gains=gains,
        leaks_enabled=leaks_enabled,
        amplifier_mode=mode,
        amp_gains=amp_gains,
    )
