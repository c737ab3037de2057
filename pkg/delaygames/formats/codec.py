"""Loading and dumping games, strategy profiles, traces and reports.

Every file is JSON. Dumps are canonical (sorted keys, two-space indent,
trailing newline) so identical inputs give byte-identical outputs. Traces
are newline-delimited JSON, one record per period.
"""

import json
import logging
from pathlib import Path
from typing import IO, Any, Dict, List, Optional, Tuple, Type, TypeVar, Union

from pydantic import BaseModel, ValidationError

from ..errors import FormatError, ModelViolation
from ..game import DelaySpace, GameGraph, Mode, PlayerSpec, Transition
from ..strategy import FiniteStateStrategy, ObservationPattern, StrategyProfile, UpdateRule
from .schema import (
    DelaySequenceModel,
    FiniteStateModel,
    GameFileModel,
    MemorylessModel,
    ProfileFileModel,
    StateModel,
    ThreadTraceRecordModel,
    TraceRecordModel,
)

logger = logging.getLogger(__name__)

M = TypeVar("M", bound=BaseModel)
PathLike = Union[str, Path]


def _read(path: PathLike) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise FormatError(f"cannot read {path}: {e.strerror or e}")


def _parse(model: Type[M], text: str, what: str) -> M:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"{what}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}")
    try:
        return model.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(part) for part in first["loc"]) or "<root>"
        raise FormatError(f"{what}: {where}: {first['msg']} ({e.error_count()} problem(s))")


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def parse_game(text: str) -> GameGraph:
    """Build a game from its file text; semantic checks are left to ``validate``."""
    model = _parse(GameFileModel, text, "game file")
    ids, bases, layers = [], {}, {}
    for entry in model.states:
        if isinstance(entry, StateModel):
            ids.append(entry.id)
            bases[entry.id] = entry.base or entry.id
            layers[entry.id] = tuple(entry.layer)
        else:
            ids.append(entry)
    transitions = [
        Transition(tr.source, tuple(tr.actions), tuple(tr.signals), tr.target, tuple(tr.payoffs))
        for tr in model.transitions
    ]
    delay_space = None
    if model.mode == Mode.DELAYED.value:
        delay_space = DelaySpace(tuple(frozenset(ds) for ds in model.delays))
        profiles = list(delay_space.profiles())
        transitions = [
            Transition(tr.source, tr.actions, tr.signals, tr.target, tr.payoffs, prof)
            for tr in transitions
            for prof in profiles
        ]
    return GameGraph(
        ids,
        model.initial,
        [PlayerSpec(p.name, tuple(p.actions), tuple(p.signals)) for p in model.players],
        transitions,
        mode=Mode(model.mode),
        delay_space=delay_space,
        aggregator=model.aggregator,
        deterministic=model.deterministic,
        name=model.name,
        bases=bases or None,
        layers=layers or None,
        moduli=model.moduli,
    )


def load_game(path: PathLike) -> GameGraph:
    g = parse_game(_read(path))
    logger.debug(f"Loaded {g!r} from {path}")
    return g


def game_to_dict(g: GameGraph) -> Dict[str, Any]:
    if g.is_delayed:
        outcomes: Dict[Tuple[str, Tuple[str, ...]], set] = {}
        for tr in g.transitions:
            outcomes.setdefault((tr.source, tr.actions), set()).add(tr.basic())
        if any(len(basic) > 1 for basic in outcomes.values()):
            raise ModelViolation("delay-dependent outcomes cannot be written in the game file format")
        basic = sorted({tr.basic() for tr in g.transitions}, key=Transition.sort_key)
    else:
        basic = list(g.transitions)
    if g.moduli:
        states: List[Any] = [{"id": v, "base": g.base_state(v), "layer": list(g.layer(v))} for v in g.states]
    else:
        states = list(g.states)
    data: Dict[str, Any] = {
        "players": [{"name": p.name, "actions": list(p.actions), "signals": list(p.signals)} for p in g.players],
        "states": states,
        "initial": g.initial,
        "mode": g.mode.value,
        "aggregator": g.aggregator,
        "deterministic": g.deterministic,
        "transitions": [
            {
                "source": tr.source,
                "actions": list(tr.actions),
                "signals": list(tr.signals),
                "target": tr.target,
                "payoffs": list(tr.payoffs),
            }
            for tr in basic
        ],
    }
    if g.name is not None:
        data["name"] = g.name
    if g.moduli:
        data["moduli"] = list(g.moduli)
    if g.is_delayed:
        data["delays"] = [list(g.delay_space.delays(i)) for i in range(g.n_players)]
    return data


def dump_game(g: GameGraph) -> str:
    return canonical_json(game_to_dict(g))


def _strategy_from_model(entry: Union[MemorylessModel, FiniteStateModel]) -> FiniteStateStrategy:
    if isinstance(entry, MemorylessModel):
        return FiniteStateStrategy.memoryless(entry.actions, name=entry.name)
    output = {}
    for rule in entry.output:
        key = (rule.memory, rule.state)
        if key in output:
            raise FormatError(f"duplicate output rule for memory {rule.memory!r}, state {rule.state!r}")
        output[key] = rule.action
    update = [
        UpdateRule(u.memory, u.action, ObservationPattern(u.observation), u.state, u.next) for u in entry.update
    ]
    return FiniteStateStrategy(entry.memory, entry.initial, update, output, name=entry.name or "finite-state")


def parse_profile(text: str) -> StrategyProfile:
    model = _parse(ProfileFileModel, text, "profile file")
    return StrategyProfile(tuple(_strategy_from_model(entry) for entry in model.players))


def load_profile(path: PathLike) -> StrategyProfile:
    return parse_profile(_read(path))


def dump_profile(profile: StrategyProfile) -> str:
    return canonical_json(profile.describe())


def load_delay_sequence(path: PathLike) -> List[Tuple[int, ...]]:
    model = _parse(DelaySequenceModel, _read(path), "delay sequence")
    return [tuple(p) for p in model.delays]


def encode_record(record: Dict[str, Any]) -> str:
    """One trace record as a JSON line."""
    return json.dumps(record, sort_keys=True) + "\n"


def decode_record(line: str, model: Type[M] = TraceRecordModel) -> M:
    return _parse(model, line.strip(), "trace record")


class TraceWriter:
    """Writes one JSON line per record; usable as a simulation or thread-schedule listener."""

    def __init__(self, stream: IO[str]):
        self.stream = stream
        self.count = 0

    def __call__(self, record) -> None:
        self.stream.write(encode_record(record.to_dict()))
        self.count += 1


def read_trace(path: PathLike) -> List[TraceRecordModel]:
    return [decode_record(line) for line in _read(path).splitlines() if line.strip()]


def read_thread_trace(path: PathLike) -> List[ThreadTraceRecordModel]:
    return [decode_record(line, ThreadTraceRecordModel) for line in _read(path).splitlines() if line.strip()]


def dump_report(report: Any, extra: Optional[Dict[str, Any]] = None) -> str:
    data = report.to_dict()
    if extra:
        data.update(extra)
    return canonical_json(data)


def write_text(path: PathLike, text: str) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    logger.info(f"Wrote {path}")
