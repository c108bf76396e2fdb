"""2-D aircraft pure-pursuit environment.

Two point-mass aircraft fly in the horizontal plane (x east, y north,
heading in degrees from the +X axis, counter-clockwise positive).  The
blue aircraft is the learning agent with five discrete actions; the red
aircraft follows a scripted path.  The state seen by the agent is the
relative geometry (range, aspect angle, antenna train angle, speed
difference) and the reward is the McGrew pursuit score offset by -0.5.
"""

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import IntEnum
from importlib import resources
from pathlib import Path

import numpy as np

from .envcore import Environment, EnvironmentSpec, StepOutcome

_DEG = math.pi / 180.0


def wrap_heading(deg: float) -> float:
    """Wrap an angle in degrees to [0, 360)."""
    return deg % 360.0


def _signed_diff(a: float, b: float) -> float:
    """Signed difference a - b wrapped to (-180, 180]."""
    d = (a - b) % 360.0
    return d - 360.0 if d > 180.0 else d


@dataclass(frozen=True, slots=True)
class AircraftState:
    """Position (m), heading (degrees in [0, 360)), ground speed (m/s)."""

    x: float
    y: float
    heading: float
    speed: float

    def __post_init__(self):
        object.__setattr__(self, "heading", wrap_heading(self.heading))


@dataclass(frozen=True, slots=True)
class RelativeGeometry:
    """Blue-centric relative geometry.

    range_m: distance between the aircraft along the line of sight.
    aa: aspect angle in [0, 180]; 0 when blue sits on red's tail.
    ata: antenna train angle in [0, 180]; 0 when red is dead ahead of blue.
    speed_diff: blue speed minus red speed (m/s).
    """

    range_m: float
    aa: float
    ata: float
    speed_diff: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.range_m, self.aa, self.ata, self.speed_diff])


@dataclass(frozen=True, slots=True)
class McGrewParams:
    desired_range: float = 380.0  # m
    k: float = 5.0  # range-spread scaling factor

    def __post_init__(self):
        if self.desired_range <= 0 or self.k <= 0:
            raise ValueError("desired_range and k must be strictly positive")


class PursuitAction(IntEnum):
    DO_NOTHING = 0
    TURN_LEFT = 1  # +10 degrees, counter-clockwise
    TURN_RIGHT = 2  # -10 degrees
    SPEED_UP = 3  # x1.1, clamped to the speed limits
    SLOW_DOWN = 4  # x0.9, clamped to the speed limits


def relative_geometry(blue: AircraftState, red: AircraftState) -> RelativeGeometry:
    """Range, AA, ATA, and speed difference for a blue/red pair.

    ATA is the unsigned angle between blue's nose and the blue-to-red
    line of sight.  AA is the unsigned angle between the red-to-blue
    line of sight and red's tail, so AA = 0 means blue is directly
    astern.  Raises ValueError for coincident aircraft.
    """
    dx = red.x - blue.x
    dy = red.y - blue.y
    r = math.hypot(dx, dy)
    if r == 0.0:
        raise ValueError("aircraft are coincident; relative geometry undefined")
    los_to_red = math.atan2(dy, dx) / _DEG
    ata = abs(_signed_diff(los_to_red, blue.heading))
    los_to_blue = wrap_heading(los_to_red + 180.0)
    aa = 180.0 - abs(_signed_diff(los_to_blue, red.heading))
    return RelativeGeometry(r, aa, ata, blue.speed - red.speed)


def mcgrew_angular(aa: float, ata: float) -> float:
    """Angular advantage in [0, 1]; 1 exactly on the tail, nose on."""
    if not 0.0 <= aa <= 180.0 or not 0.0 <= ata <= 180.0:
        raise ValueError(f"angles must lie in [0, 180], got AA={aa}, ATA={ata}")
    return 0.5 * ((1.0 - aa / 180.0) + (1.0 - ata / 180.0))


def mcgrew_range(range_m: float, params: McGrewParams = McGrewParams()) -> float:
    """Range advantage in (0, 1], peaked at the desired range.

    The spread of the peak is k*180 meters, so larger k tolerates a
    wider band of ranges around the desired one.
    """
    return math.exp(-abs(range_m - params.desired_range) / (params.k * 180.0))


def mcgrew_score(geom: RelativeGeometry, params: McGrewParams = McGrewParams()) -> float:
    """Combined pursuit-advantage score: angular score times range score."""
    return mcgrew_angular(geom.aa, geom.ata) * mcgrew_range(geom.range_m, params)


def pursuit_reward(geom: RelativeGeometry, params: McGrewParams = McGrewParams()) -> float:
    """Per-step reward: McGrew score offset by -0.5, in [-0.5, 0.5]."""
    return mcgrew_score(geom, params) - 0.5


@dataclass(frozen=True, slots=True)
class ScriptSegment:
    start_step: int
    heading_rate: float  # degrees per step
    speed_rate: float  # fractional speed change per step


@dataclass(frozen=True)
class OpponentScript:
    """Scripted red-aircraft behaviour: initial state plus rate segments.

    At step t the segment with the largest start_step <= t is active;
    before the first segment the red aircraft holds heading and speed.
    """

    initial: AircraftState
    segments: tuple[ScriptSegment, ...] = (ScriptSegment(0, 0.0, 0.0),)
    _starts: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        starts = [seg.start_step for seg in self.segments]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("script segments must have strictly increasing start steps")
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "_starts", tuple(starts))

    def rates_at(self, t: int) -> tuple[float, float]:
        """(heading_rate, speed_rate) active at step t."""
        i = bisect_right(self._starts, t) - 1
        if i < 0:
            return 0.0, 0.0
        seg = self.segments[i]
        return seg.heading_rate, seg.speed_rate


def save_script(script: OpponentScript, path) -> None:
    """Write a script as plain text: one header line, one line per segment."""
    lines = [f"{script.initial.x!r} {script.initial.y!r} "
             f"{script.initial.heading!r} {script.initial.speed!r}"]
    for seg in script.segments:
        lines.append(f"{seg.start_step} {seg.heading_rate!r} {seg.speed_rate!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_script(text: str, origin: str) -> OpponentScript:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        rows.append((lineno, line.split()))
    if not rows:
        raise ValueError(f"{origin}: empty scenario file")
    lineno, head = rows[0]
    if len(head) != 4:
        raise ValueError(f"{origin}:{lineno}: header must be 'x y heading speed'")
    initial = AircraftState(*(float(v) for v in head))
    segments = []
    for lineno, parts in rows[1:]:
        if len(parts) != 3:
            raise ValueError(f"{origin}:{lineno}: segment must be 'start_step heading_rate speed_rate'")
        segments.append(ScriptSegment(int(float(parts[0])), float(parts[1]), float(parts[2])))
    if not segments:
        segments = [ScriptSegment(0, 0.0, 0.0)]
    return OpponentScript(initial, tuple(segments))


def load_script(path) -> OpponentScript:
    path = Path(path)
    return _parse_script(path.read_text(), str(path))


BUNDLED_SCENARIOS = ("straight", "gentle_turn", "s_turn", "u_turn")


def bundled_scenario(name: str) -> OpponentScript:
    """Load one of the packaged test scenarios by name."""
    if name not in BUNDLED_SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; bundled: {', '.join(BUNDLED_SCENARIOS)}")
    text = resources.files("d2dspl.scenarios").joinpath(f"{name}.txt").read_text()
    return _parse_script(text, f"scenario:{name}")


@dataclass(frozen=True, slots=True)
class PursuitConfig:
    dt: float = 0.5  # seconds per step
    speed_min: float = 50.0
    speed_max: float = 400.0
    max_steps: int = 700
    mcgrew: McGrewParams = McGrewParams()

    def __post_init__(self):
        if self.dt <= 0 or self.max_steps <= 0:
            raise ValueError("dt and max_steps must be strictly positive")
        if not 0 < self.speed_min < self.speed_max:
            raise ValueError("require 0 < speed_min < speed_max")


# Blue always starts at the origin heading east; red starts ahead and to
# the left, flying straight unless a scenario script says otherwise.
BLUE_START = AircraftState(0.0, 0.0, 0.0, 125.0)
RED_TRAINING_START = AircraftState(1500.0, 300.0, 50.0, 125.0)


def straight_training_script() -> OpponentScript:
    return OpponentScript(RED_TRAINING_START)


def spawn_training_episode(
    rng: np.random.Generator,
    pos_jitter: float = 50.0,
    heading_jitter: float = 5.0,
) -> tuple[AircraftState, AircraftState, OpponentScript]:
    """Blue/red start states and the straight-line red script.

    Red's position and heading are perturbed uniformly within the given
    jitter bounds (three draws from the stream, in x/y/heading order);
    zero jitter reproduces the nominal start exactly.
    """
    script = straight_training_script()
    red = perturbed_spawn(script.initial, rng, pos_jitter, heading_jitter)
    return BLUE_START, red, script


def perturbed_spawn(
    nominal: AircraftState,
    rng: np.random.Generator,
    pos_jitter: float,
    heading_jitter: float,
) -> AircraftState:
    dx = rng.uniform(-pos_jitter, pos_jitter) if pos_jitter > 0 else 0.0
    dy = rng.uniform(-pos_jitter, pos_jitter) if pos_jitter > 0 else 0.0
    dh = rng.uniform(-heading_jitter, heading_jitter) if heading_jitter > 0 else 0.0
    return AircraftState(nominal.x + dx, nominal.y + dy, nominal.heading + dh, nominal.speed)


def _clamp_speed(speed: float, cfg: PursuitConfig) -> float:
    return min(max(speed, cfg.speed_min), cfg.speed_max)


def pursuit_step(
    blue: AircraftState,
    red: AircraftState,
    action: int,
    script: OpponentScript,
    t: int,
    cfg: PursuitConfig = PursuitConfig(),
) -> tuple[AircraftState, AircraftState, StepOutcome]:
    """Advance both aircraft one timestep.

    Blue applies its action (heading change first, then the positional
    advance), red follows the script segment active at t.  The reward is
    computed from the post-move geometry; the episode terminates when
    the step budget is exhausted.
    """
    if t >= cfg.max_steps:
        raise ValueError(f"step index {t} beyond the {cfg.max_steps}-step episode")
    bh, bv = blue.heading, blue.speed
    if action == PursuitAction.DO_NOTHING:
        pass
    elif action == PursuitAction.TURN_LEFT:
        bh = wrap_heading(bh + 10.0)
    elif action == PursuitAction.TURN_RIGHT:
        bh = wrap_heading(bh - 10.0)
    elif action == PursuitAction.SPEED_UP:
        bv = _clamp_speed(bv * 1.1, cfg)
    elif action == PursuitAction.SLOW_DOWN:
        bv = _clamp_speed(bv * 0.9, cfg)
    else:
        raise ValueError(f"invalid pursuit action {action!r}")

    heading_rate, speed_rate = script.rates_at(t)
    rh = wrap_heading(red.heading + heading_rate)
    rv = _clamp_speed(red.speed * (1.0 + speed_rate), cfg)

    dt = cfg.dt
    blue2 = AircraftState(
        blue.x + bv * dt * math.cos(bh * _DEG),
        blue.y + bv * dt * math.sin(bh * _DEG),
        bh,
        bv,
    )
    red2 = AircraftState(
        red.x + rv * dt * math.cos(rh * _DEG),
        red.y + rv * dt * math.sin(rh * _DEG),
        rh,
        rv,
    )
    geom = relative_geometry(blue2, red2)
    outcome = StepOutcome(geom.as_vector(), pursuit_reward(geom, cfg.mcgrew), t + 1 >= cfg.max_steps)
    return blue2, red2, outcome


@dataclass(frozen=True)
class DiscretizationScheme:
    """Interior bin edges for (range, AA, ATA, speed difference).

    Edge count k yields k+1 regions per variable; values beyond the
    outermost edges clamp into the outermost bins.  The canonical scheme
    has 14 x 10 x 10 x 10 = 14,000 cells; coarser schemes are allowed
    for quick experiments.
    """

    range_edges: tuple[float, ...]
    aa_edges: tuple[float, ...]
    ata_edges: tuple[float, ...]
    dv_edges: tuple[float, ...]

    def __post_init__(self):
        for name in ("range_edges", "aa_edges", "ata_edges", "dv_edges"):
            edges = tuple(float(e) for e in getattr(self, name))
            if not edges:
                raise ValueError(f"{name} must be non-empty")
            if any(b <= a for a, b in zip(edges, edges[1:])):
                raise ValueError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, edges)

    @property
    def bins(self) -> tuple[int, int, int, int]:
        return (len(self.range_edges) + 1, len(self.aa_edges) + 1,
                len(self.ata_edges) + 1, len(self.dv_edges) + 1)

    @property
    def n_states(self) -> int:
        b = self.bins
        return b[0] * b[1] * b[2] * b[3]

    @classmethod
    def default(cls) -> "DiscretizationScheme":
        # Range regions denser around the 380 m desired range.
        return cls(
            range_edges=(150, 250, 350, 450, 550, 700, 900, 1100, 1400, 1700, 2100, 2600, 3200),
            aa_edges=tuple(np.linspace(0.0, 180.0, 11)[1:-1]),
            ata_edges=tuple(np.linspace(0.0, 180.0, 11)[1:-1]),
            dv_edges=tuple(np.linspace(-50.0, 50.0, 11)[1:-1]),
        )

    @classmethod
    def with_bins(cls, n_range: int, n_aa: int, n_ata: int, n_dv: int) -> "DiscretizationScheme":
        """Reduced scheme with geometric range edges and uniform angles."""
        if min(n_range, n_aa, n_ata, n_dv) < 2:
            raise ValueError("every variable needs at least 2 regions")
        return cls(
            range_edges=tuple(np.geomspace(150.0, 3200.0, n_range - 1)),
            aa_edges=tuple(np.linspace(0.0, 180.0, n_aa + 1)[1:-1]),
            ata_edges=tuple(np.linspace(0.0, 180.0, n_ata + 1)[1:-1]),
            dv_edges=tuple(np.linspace(-50.0, 50.0, n_dv + 1)[1:-1]),
        )


class PursuitDiscretizer:
    """Maps a (range, AA, ATA, speed diff) vector to a flat cell index."""

    def __init__(self, scheme: DiscretizationScheme = None):
        self.scheme = scheme if scheme is not None else DiscretizationScheme.default()
        self.n_states = self.scheme.n_states
        self._strides = self.scheme.bins[1:]  # radices of the three minor digits

    def __call__(self, state) -> int:
        r, aa, ata, dv = state[0], state[1], state[2], state[3]
        s = self.scheme
        n_aa, n_ata, n_dv = self._strides
        i = bisect_right(s.range_edges, r)
        i = i * n_aa + bisect_right(s.aa_edges, aa)
        i = i * n_ata + bisect_right(s.ata_edges, ata)
        return i * n_dv + bisect_right(s.dv_edges, dv)

    def indices_batch(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states)
        s = self.scheme
        n_aa, n_ata, n_dv = self._strides
        idx = np.searchsorted(s.range_edges, states[:, 0], side="right")
        idx = idx * n_aa + np.searchsorted(s.aa_edges, states[:, 1], side="right")
        idx = idx * n_ata + np.searchsorted(s.ata_edges, states[:, 2], side="right")
        return idx * n_dv + np.searchsorted(s.dv_edges, states[:, 3], side="right")


def discretize_pursuit(geom, scheme: DiscretizationScheme = None) -> int:
    """Flat cell index for a RelativeGeometry (or 4-vector)."""
    if isinstance(geom, RelativeGeometry):
        geom = (geom.range_m, geom.aa, geom.ata, geom.speed_diff)
    return PursuitDiscretizer(scheme)(geom)


class PursuitEnv(Environment):
    """Pursuit episode against a scripted red aircraft.

    The continuous state is the geometry 4-vector (range, AA, ATA, speed
    difference).  reset() perturbs red's start around the scenario's
    nominal state using the injected stream; zero jitter keeps it exact.
    """

    def __init__(
        self,
        scenario: OpponentScript = None,
        cfg: PursuitConfig = PursuitConfig(),
        pos_jitter: float = 50.0,
        heading_jitter: float = 5.0,
        n_discrete_states: int = 14_000,
    ):
        super().__init__()
        self.scenario = scenario if scenario is not None else straight_training_script()
        self.cfg = cfg
        self.pos_jitter = pos_jitter
        self.heading_jitter = heading_jitter
        self.spec = EnvironmentSpec(
            name="pursuit",
            n_state_vars=4,
            n_actions=5,
            n_discrete_states=n_discrete_states,
            max_steps=cfg.max_steps,
        )
        self.blue = BLUE_START
        self.red = self.scenario.initial

    def _do_reset(self, rng: np.random.Generator) -> np.ndarray:
        self.blue = BLUE_START
        self.red = perturbed_spawn(self.scenario.initial, rng, self.pos_jitter, self.heading_jitter)
        return relative_geometry(self.blue, self.red).as_vector()

    def _do_step(self, action: int) -> StepOutcome:
        self.blue, self.red, outcome = pursuit_step(
            self.blue, self.red, action, self.scenario, self._steps, self.cfg
        )
        return outcome

    def episode_score(self, total_reward: float, steps: int) -> float:
        """Mean per-timestep McGrew score (the un-offset reward)."""
        return total_reward / steps + 0.5
