"""Pydantic models of the JSON file formats (game, profile, trace, delay sequence)."""

from typing import Annotated, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


class PlayerModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    actions: List[str] = Field(min_length=1)
    signals: List[str] = Field(min_length=1)


class StateModel(BaseModel):
    """An unravelled state: its own id, the base state it copies and its layer indices."""

    model_config = ConfigDict(extra="forbid")

    id: str
    base: Optional[str] = None
    layer: List[int] = Field(default_factory=list)


class TransitionModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    source: str
    actions: List[str]
    signals: List[str]
    target: str
    payoffs: List[int]


class GameFileModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    players: List[PlayerModel] = Field(min_length=1)
    states: List[Union[str, StateModel]] = Field(min_length=1)
    moduli: List[int] = Field(default_factory=list)
    initial: str
    mode: Literal["instant", "delayed"] = "instant"
    delays: Optional[List[List[int]]] = None
    aggregator: str = "mean-payoff"
    deterministic: bool = True
    transitions: List[TransitionModel]

    @model_validator(mode="after")
    def _delays_follow_mode(self):
        if self.mode == "delayed" and self.delays is None:
            raise ValueError("delayed games need a 'delays' entry")
        if self.mode == "instant" and self.delays is not None:
            raise ValueError("instant games take no 'delays' entry")
        return self


class MemorylessModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["memoryless"]
    name: Optional[str] = None
    actions: Dict[str, str] = Field(min_length=1)


class UpdateRuleModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    memory: str = "*"
    action: str = "*"
    observation: str = "*"
    state: str = "*"
    next: str


class OutputRuleModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    memory: str = "*"
    state: str = "*"
    action: str


class FiniteStateModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["finite-state"]
    name: Optional[str] = None
    memory: List[str] = Field(min_length=1)
    initial: str
    update: List[UpdateRuleModel] = Field(default_factory=list)
    output: List[OutputRuleModel] = Field(min_length=1)


StrategyModel = Annotated[Union[MemorylessModel, FiniteStateModel], Field(discriminator="kind")]


class ProfileFileModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    players: List[StrategyModel] = Field(min_length=1)


class TraceRecordModel(BaseModel):
    t: int = Field(ge=1)
    state: str
    actions: List[str]
    signals: List[str]
    delays: Optional[List[int]] = None
    delivered: List[List[str]]


class ThreadTraceRecordModel(BaseModel):
    """One player's thread schedule at the end of a period, as written by ``transfer --trace``."""

    player: int = Field(ge=1)
    t: int = Field(ge=1)
    h: str
    action: str
    state: str
    delivered: List[str]
    pending: List[str]


class DelaySequenceModel(BaseModel):
    """Delay profiles for an explicit scheduler, one per period."""

    model_config = ConfigDict(extra="forbid")

    delays: List[List[int]] = Field(min_length=1)
