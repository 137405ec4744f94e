"""
Unit commitment as a two-stage DRLP.

First stage: commitment binaries (on, start-up, shut-down) and per-period
generation bands [x_lo, x_hi] that already respect capacity and ramping.
Second stage, period by period: generation inside the band, renewable
curtailment, demand shedding, DC line limits through shift factors, and
power balance. The uncertainty is the renewable forecast error per bus and
period, ordered bus-major (index i*T + t).

The affine policy is tied: every second-stage variable of period t responds
to the total forecast error of period t through one slope and one intercept.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from errors import ModelError, SchemaError
from fileio import load_samples, read_json, write_json
from models import BoxSet, FirstStageSpace, Instance, PolicyStructure, RecourseData, SampleSet
from synthetic import draw_scenarios, rng_from

log = logging.getLogger(__name__)

UC_FORMAT = "drlp-uc-system"
SHED_COST = 3500.0
CURTAIL_COST = 20.0
PROFILES = ("tiny", "small")


def _series(value, name: str, T: int) -> tuple:
    array = np.array(value, dtype=float).ravel()
    if array.size != T:
        raise ModelError(f"{name}: expected {T} periods, got {array.size}")
    if not np.all(np.isfinite(array)) or np.any(array < 0):
        raise ModelError(f"{name}: values must be finite and >= 0")
    return tuple(array.tolist())


@dataclass(frozen=True)
class Bus:
    name: str
    demand: tuple
    forecast: tuple
    capacity: float = 0.0
    sheddable: bool = True


@dataclass(frozen=True)
class Generator:
    name: str
    bus: int
    no_load_cost: float
    startup_cost: float
    shutdown_cost: float
    marginal_cost: float
    p_min: float
    p_max: float
    ramp_up: float
    ramp_down: float
    startup_ramp: float
    shutdown_ramp: float
    min_up: int = 1
    min_down: int = 1
    initial_on: bool = False
    initial_output: float = 0.0


@dataclass(frozen=True)
class Line:
    name: str
    capacity: float
    shift_factors: tuple


@dataclass(frozen=True)
class UcSystem:
    T: int
    buses: tuple
    generators: tuple
    lines: tuple = ()
    shed_cost: float = SHED_COST
    curtail_cost: float = CURTAIL_COST

    def __post_init__(self):
        if self.T < 1:
            raise ModelError("T: need at least one period")
        if not self.buses:
            raise ModelError("buses: need at least one bus")
        if not self.generators:
            raise ModelError("generators: need at least one generator")
        buses = []
        for i, bus in enumerate(self.buses):
            where = f"buses[{i}]"
            demand = _series(bus.demand, f"{where}.demand", self.T)
            forecast = _series(bus.forecast, f"{where}.forecast", self.T)
            if bus.capacity < 0 or max(forecast) > bus.capacity + 1e-9:
                raise ModelError(f"{where}.capacity: must be >= 0 and cover the forecast")
            buses.append(Bus(bus.name, demand, forecast, float(bus.capacity), bool(bus.sheddable)))
        for k, gen in enumerate(self.generators):
            where = f"generators[{k}]"
            if not 0 <= gen.bus < len(buses):
                raise ModelError(f"{where}.bus: no bus {gen.bus}")
            numbers = (gen.no_load_cost, gen.startup_cost, gen.shutdown_cost, gen.marginal_cost, gen.p_min,
                       gen.p_max, gen.ramp_up, gen.ramp_down, gen.startup_ramp, gen.shutdown_ramp)
            if min(numbers) < 0:
                raise ModelError(f"{where}: costs, limits and ramps must be >= 0")
            if gen.p_min > gen.p_max:
                raise ModelError(f"{where}.p_min: exceeds p_max")
            if not (1 <= gen.min_up <= self.T and 1 <= gen.min_down <= self.T):
                raise ModelError(f"{where}: min_up and min_down must lie in 1..T")
            if gen.initial_on and not gen.p_min <= gen.initial_output <= gen.p_max:
                raise ModelError(f"{where}.initial_output: must lie in [p_min, p_max] when initially on")
            if not gen.initial_on and gen.initial_output != 0.0:
                raise ModelError(f"{where}.initial_output: must be 0 when initially off")
        for l, line in enumerate(self.lines):
            if line.capacity < 0:
                raise ModelError(f"lines[{l}].capacity: must be >= 0")
            if len(line.shift_factors) != len(buses):
                raise ModelError(f"lines[{l}].shift_factors: expected {len(buses)} entries, got {len(line.shift_factors)}")
        if self.shed_cost < 0 or self.curtail_cost < 0:
            raise ModelError("penalty costs must be >= 0")
        object.__setattr__(self, "buses", tuple(buses))
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "lines", tuple(Line(l.name, float(l.capacity), tuple(map(float, l.shift_factors)))
                                                for l in self.lines))

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_generators(self) -> int:
        return len(self.generators)

    @property
    def m(self) -> int:
        return self.n_buses * self.T

    def demand(self) -> np.ndarray:
        return np.array([b.demand for b in self.buses])

    def forecast(self) -> np.ndarray:
        return np.array([b.forecast for b in self.buses])


@dataclass(frozen=True)
class UcFirstStage:
    """Positions in x1: u_on, u_up, u_down (binary), then x_hi, x_lo (continuous), generator-major."""

    n_generators: int
    T: int

    def _at(self, block: int, g: int, t: int) -> int:
        return block * self.n_generators * self.T + g * self.T + t

    def on(self, g: int, t: int) -> int:
        return self._at(0, g, t)

    def up(self, g: int, t: int) -> int:
        return self._at(1, g, t)

    def down(self, g: int, t: int) -> int:
        return self._at(2, g, t)

    def upper(self, g: int, t: int) -> int:
        return self._at(3, g, t)

    def lower(self, g: int, t: int) -> int:
        return self._at(4, g, t)

    @property
    def n_binary(self) -> int:
        return 3 * self.n_generators * self.T

    @property
    def n_continuous(self) -> int:
        return 2 * self.n_generators * self.T

    def decode(self, x1) -> dict:
        x1 = np.asarray(x1, dtype=float)
        shape = (self.n_generators, self.T)
        size = self.n_generators * self.T
        return {key: x1[k * size:(k + 1) * size].reshape(shape)
                for k, key in enumerate(("on", "up", "down", "upper", "lower"))}


@dataclass(frozen=True)
class UcSecondStage:
    """Positions in x2: generation per generator, then curtailment and shedding per bus."""

    n_generators: int
    n_buses: int
    T: int

    def gen(self, g: int, t: int) -> int:
        return g * self.T + t

    def curtail(self, i: int, t: int) -> int:
        return (self.n_generators + i) * self.T + t

    def shed(self, i: int, t: int) -> int:
        return (self.n_generators + self.n_buses + i) * self.T + t

    @property
    def n2(self) -> int:
        return (self.n_generators + 2 * self.n_buses) * self.T

    def period(self, index: int) -> int:
        return index % self.T


def xi_index(i: int, t: int, T: int) -> int:
    return i * T + t


def uc_support(system: UcSystem) -> BoxSet:
    """Forecast error at bus i, period t ranges over [-w_it, W_i - w_it]."""
    forecast = system.forecast()
    capacity = np.array([b.capacity for b in system.buses])[:, None]
    return BoxSet((-forecast).ravel(), (capacity - forecast).ravel())


class _Rows:
    """Dense row collector for one constraint family."""

    def __init__(self, width: int, extra: int = 0):
        self.width, self.extra = width, extra
        self.rows, self.extras, self.rhs = [], [], []

    def add(self, coefs: dict, rhs: float, extra: dict | None = None) -> None:
        row = np.zeros(self.width)
        for j, v in coefs.items():
            row[j] += v
        self.rows.append(row)
        if self.extra:
            more = np.zeros(self.extra)
            for j, v in (extra or {}).items():
                more[j] += v
            self.extras.append(more)
        self.rhs.append(float(rhs))

    def matrix(self) -> np.ndarray:
        return np.array(self.rows).reshape(len(self.rows), self.width)

    def extra_matrix(self) -> np.ndarray:
        return np.array(self.extras).reshape(len(self.rows), self.extra)


def _first_stage(system: UcSystem, layout: UcFirstStage) -> FirstStageSpace:
    rows = _Rows(layout.n_binary + layout.n_continuous)
    T = system.T
    for g, gen in enumerate(system.generators):
        s0 = 1.0 if gen.initial_on else 0.0
        for t in range(T):
            # u_on(t) - u_on(t-1) = u_up(t) - u_down(t)
            logic = {layout.on(g, t): 1.0, layout.up(g, t): -1.0, layout.down(g, t): 1.0}
            if t > 0:
                logic[layout.on(g, t - 1)] = -1.0
            rows.add(logic, s0 if t == 0 else 0.0)
            rows.add({j: -v for j, v in logic.items()}, -s0 if t == 0 else 0.0)
            rows.add({layout.up(g, t): 1.0, layout.down(g, t): 1.0}, 1.0)

            window = range(max(0, t - gen.min_up + 1), t + 1)
            up_window = {layout.up(g, tau): 1.0 for tau in window}
            up_window[layout.on(g, t)] = -1.0
            rows.add(up_window, 0.0)
            window = range(max(0, t - gen.min_down + 1), t + 1)
            down_window = {layout.down(g, tau): 1.0 for tau in window}
            down_window[layout.on(g, t)] = 1.0
            rows.add(down_window, 1.0)

            # p_min u_on <= x_lo <= x_hi <= p_max u_on
            rows.add({layout.on(g, t): gen.p_min, layout.lower(g, t): -1.0}, 0.0)
            rows.add({layout.lower(g, t): 1.0, layout.upper(g, t): -1.0}, 0.0)
            rows.add({layout.upper(g, t): 1.0, layout.on(g, t): -gen.p_max}, 0.0)

            # x_hi(t) - x_lo(t-1) <= R_up u_on(t-1) + R_su u_up(t)
            ramp_up = {layout.upper(g, t): 1.0, layout.up(g, t): -gen.startup_ramp}
            # x_hi(t-1) - x_lo(t) <= R_down u_on(t) + R_sd u_down(t)
            ramp_down = {layout.lower(g, t): -1.0, layout.on(g, t): -gen.ramp_down,
                         layout.down(g, t): -gen.shutdown_ramp}
            if t > 0:
                ramp_up[layout.lower(g, t - 1)] = -1.0
                ramp_up[layout.on(g, t - 1)] = -gen.ramp_up
                ramp_down[layout.upper(g, t - 1)] = 1.0
                rows.add(ramp_up, 0.0)
                rows.add(ramp_down, 0.0)
            else:
                rows.add(ramp_up, gen.initial_output + gen.ramp_up * s0)
                rows.add(ramp_down, -gen.initial_output)
    return FirstStageSpace(layout.n_binary, layout.n_continuous, rows.matrix(), np.array(rows.rhs))


def _recourse(system: UcSystem, first: UcFirstStage, second: UcSecondStage) -> RecourseData:
    T, I = system.T, system.n_buses
    n1 = first.n_binary + first.n_continuous
    rows = _Rows(n1 + second.n2, extra=system.m)
    demand, forecast = system.demand(), system.forecast()
    x2 = n1  # offset of x2 inside the row

    for t in range(T):
        for g in range(system.n_generators):
            rows.add({x2 + second.gen(g, t): 1.0, first.upper(g, t): -1.0}, 0.0)
            rows.add({x2 + second.gen(g, t): -1.0, first.lower(g, t): 1.0}, 0.0)
        for i, bus in enumerate(system.buses):
            rows.add({x2 + second.curtail(i, t): 1.0}, forecast[i, t], {xi_index(i, t, T): -1.0})
            rows.add({x2 + second.curtail(i, t): -1.0}, 0.0)
            rows.add({x2 + second.shed(i, t): 1.0}, demand[i, t] if bus.sheddable else 0.0)
            rows.add({x2 + second.shed(i, t): -1.0}, 0.0)

        # net injection at bus i: sum gen + w + xi - curtail - demand + shed
        def injection(weights):
            coefs, extra = {}, {}
            for g, gen in enumerate(system.generators):
                if weights[gen.bus]:
                    coefs[x2 + second.gen(g, t)] = coefs.get(x2 + second.gen(g, t), 0.0) + weights[gen.bus]
            for i in range(I):
                if weights[i]:
                    coefs[x2 + second.curtail(i, t)] = -weights[i]
                    coefs[x2 + second.shed(i, t)] = weights[i]
                    extra[xi_index(i, t, T)] = weights[i]
            constant = float(np.dot(weights, forecast[:, t] - demand[:, t]))
            return coefs, extra, constant

        for line in system.lines:
            coefs, extra, constant = injection(np.array(line.shift_factors))
            rows.add(coefs, line.capacity - constant, extra)
            rows.add({j: -v for j, v in coefs.items()}, line.capacity + constant, {j: -v for j, v in extra.items()})

        coefs, extra, constant = injection(np.ones(I))
        rows.add(coefs, -constant, extra)
        rows.add({j: -v for j, v in coefs.items()}, constant, {j: -v for j, v in extra.items()})

    block = rows.matrix()
    return RecourseData(block[:, :n1], block[:, n1:], rows.extra_matrix(), np.array(rows.rhs))


def tied_structure(system: UcSystem) -> PolicyStructure:
    """x2_r(xi) = slope_r * (total error of period t(r)) + intercept_r."""
    second = UcSecondStage(system.n_generators, system.n_buses, system.T)
    n2, m = second.n2, system.m
    terms = []
    for r in range(n2):
        t = second.period(r)
        for i in range(system.n_buses):
            terms.append((r * (m + 1) + xi_index(i, t, system.T), 2 * r, 1.0))
        terms.append((r * (m + 1) + m, 2 * r + 1, 1.0))
    return PolicyStructure(n2, m, 2 * n2, tuple(terms))


def build_uc_instance(system: UcSystem, samples: SampleSet, epsilon: float) -> tuple[Instance, PolicyStructure]:
    support = uc_support(system)
    if samples.dim != support.dim:
        raise ModelError(f"samples: expected {support.dim} columns (buses x periods), got {samples.dim}")
    first = UcFirstStage(system.n_generators, system.T)
    second = UcSecondStage(system.n_generators, system.n_buses, system.T)

    c1 = np.zeros(first.n_binary + first.n_continuous)
    c2 = np.zeros(second.n2)
    for g, gen in enumerate(system.generators):
        for t in range(system.T):
            c1[first.on(g, t)] = gen.no_load_cost
            c1[first.up(g, t)] = gen.startup_cost
            c1[first.down(g, t)] = gen.shutdown_cost
            c2[second.gen(g, t)] = gen.marginal_cost
    for i in range(system.n_buses):
        for t in range(system.T):
            c2[second.curtail(i, t)] = system.curtail_cost
            c2[second.shed(i, t)] = system.shed_cost

    instance = Instance(
        c1=c1,
        c2=c2,
        first_stage=_first_stage(system, first),
        recourse=_recourse(system, first, second),
        support=support,
        samples=SampleSet(samples.points, support),
        epsilon=epsilon,
    )
    log.info("[uc] compiled %d buses, %d generators, T=%d: n1=%d n2=%d m=%d L=%d", system.n_buses,
             system.n_generators, system.T, instance.n1, instance.n2, instance.m, instance.L)
    return instance, tied_structure(system)


def balance_residual(system: UcSystem, x2, xi) -> np.ndarray:
    """Per-period supply minus demand at a second-stage point."""
    second = UcSecondStage(system.n_generators, system.n_buses, system.T)
    x2, xi = np.asarray(x2, dtype=float), np.asarray(xi, dtype=float)
    demand, forecast = system.demand(), system.forecast()
    out = np.zeros(system.T)
    for t in range(system.T):
        total = sum(x2[second.gen(g, t)] for g in range(system.n_generators))
        for i in range(system.n_buses):
            total += (forecast[i, t] + xi[xi_index(i, t, system.T)] - x2[second.curtail(i, t)]
                      - demand[i, t] + x2[second.shed(i, t)])
        out[t] = total
    return out


# --- Toy systems ---

_PTDF = {
    # slack bus 0
    "tiny": [("line_0_1", [0.0, -1.0])],
    "small": [
        ("line_0_1", [0.0, -2.0 / 3.0, -1.0 / 3.0]),
        ("line_0_2", [0.0, -1.0 / 3.0, -2.0 / 3.0]),
        ("line_1_2", [0.0, 1.0 / 3.0, -1.0 / 3.0]),
    ],
}
_SHAPE = {"tiny": (2, 4, (1,)), "small": (3, 6, (1, 2))}
_MAX_SHEDDABLE = 10


def toy_system(profile: str = "tiny", seed=0) -> UcSystem:
    """Desk-scale system: tiny = 2 buses, T=4, one renewable; small = 3 buses, T=6, two renewables.

    Ranges: base demand 20-40 MW with a daily swing of +/-20%; renewable
    forecasts 20-30% of total demand split over the renewable buses, with
    capacity 1.5x the peak forecast; one generator per bus sized so total
    capacity is 1.5x peak demand, p_min 10-20% of p_max, ramps 60% of p_max,
    start-up and shut-down ramps equal to p_max; lines rated at twice the
    peak demand.
    """
    if profile not in PROFILES:
        raise ModelError(f"profile: expected one of {PROFILES}, got '{profile}'")
    rng = rng_from(seed)
    n_buses, T, renewable = _SHAPE[profile]

    swing = 1.0 + 0.2 * np.sin(np.linspace(-np.pi / 2, 3 * np.pi / 2, T, endpoint=False))
    demand = np.round(rng.uniform(20.0, 40.0, n_buses)[:, None] * swing[None, :], 3)
    total = demand.sum(axis=0)
    share = rng.uniform(0.2, 0.3)
    forecast = np.zeros((n_buses, T))
    for i in renewable:
        forecast[i] = np.round(share * total / len(renewable), 3)
    ranked = np.argsort(-demand.sum(axis=1), kind="stable")[:_MAX_SHEDDABLE]
    buses = [
        Bus(f"bus{i}", tuple(demand[i]), tuple(forecast[i]),
            capacity=float(np.round(1.5 * forecast[i].max(), 3)), sheddable=bool(i in ranked))
        for i in range(n_buses)
    ]

    peak = float(total.max())
    generators = []
    for g in range(n_buses):
        p_max = float(np.round(1.5 * peak / n_buses * rng.uniform(0.95, 1.1), 3))
        generators.append(Generator(
            name=f"gen{g}",
            bus=g,
            no_load_cost=float(np.round(rng.uniform(50.0, 150.0), 2)),
            startup_cost=float(np.round(rng.uniform(100.0, 300.0), 2)),
            shutdown_cost=float(np.round(rng.uniform(0.0, 50.0), 2)),
            marginal_cost=float(np.round(rng.uniform(15.0, 40.0), 2)),
            p_min=float(np.round(p_max * rng.uniform(0.1, 0.2), 3)),
            p_max=p_max,
            ramp_up=float(np.round(0.6 * p_max, 3)),
            ramp_down=float(np.round(0.6 * p_max, 3)),
            startup_ramp=p_max,
            shutdown_ramp=p_max,
            min_up=int(rng.integers(1, 3)),
            min_down=int(rng.integers(1, 3)),
        ))
    lines = [Line(name, 2.0 * peak, tuple(factors)) for name, factors in _PTDF[profile]]
    return UcSystem(T, tuple(buses), tuple(generators), tuple(lines))


def uc_family(profile: str = "tiny", seed=0, epsilon: float = 0.01):
    """Scaling family: one toy system, N fresh forecast-error samples per call."""
    system = toy_system(profile, seed)
    support = uc_support(system)

    def family(N: int, rng: np.random.Generator):
        return build_uc_instance(system, draw_scenarios(support, N, rng), epsilon)

    return family


# --- Documents ---

def system_to_dict(system: UcSystem) -> dict:
    return {
        "format": UC_FORMAT,
        "version": 1,
        "T": system.T,
        "shed_cost": system.shed_cost,
        "curtail_cost": system.curtail_cost,
        "buses": [asdict(b) for b in system.buses],
        "generators": [asdict(g) for g in system.generators],
        "lines": [asdict(l) for l in system.lines],
    }


def _records(doc: dict, key: str, cls, source: str) -> tuple:
    items = doc.get(key, [] if key == "lines" else None)
    if items is None:
        raise SchemaError(f"{source}: missing field '{key}'")
    known = set(cls.__dataclass_fields__)
    out = []
    for k, item in enumerate(items):
        if not isinstance(item, dict):
            raise SchemaError(f"{source}: {key}[{k}] must be an object")
        unknown = set(item) - known
        if unknown:
            raise SchemaError(f"{source}: {key}[{k}]: unknown field '{sorted(unknown)[0]}'")
        try:
            out.append(cls(**item))
        except TypeError as e:
            raise SchemaError(f"{source}: {key}[{k}]: {e}") from e
    return tuple(out)


def system_from_dict(doc: dict, source: str = "system") -> UcSystem:
    if doc.get("format", UC_FORMAT) != UC_FORMAT:
        raise SchemaError(f"{source}: format '{doc.get('format')}' is not '{UC_FORMAT}'")
    if "T" not in doc:
        raise SchemaError(f"{source}: missing field 'T'")
    try:
        return UcSystem(
            T=int(doc["T"]),
            buses=_records(doc, "buses", Bus, source),
            generators=_records(doc, "generators", Generator, source),
            lines=_records(doc, "lines", Line, source),
            shed_cost=float(doc.get("shed_cost", SHED_COST)),
            curtail_cost=float(doc.get("curtail_cost", CURTAIL_COST)),
        )
    except ModelError as e:
        raise SchemaError(f"{source}: {e}") from e


def dump_uc_system(path: str, system: UcSystem) -> None:
    write_json(path, system_to_dict(system))


def sample_column_label(system: UcSystem):
    def label(j: int) -> str:
        i, t = divmod(j, system.T)
        return f"{system.buses[i].name}, period {t}"
    return label


def ingest_uc(system_file: str, samples_file: str, clamp: bool = False) -> tuple[UcSystem, SampleSet]:
    system = system_from_dict(read_json(system_file), source=system_file)
    samples = load_samples(samples_file, uc_support(system), clamp=clamp, column_label=sample_column_label(system))
    return system, samples
