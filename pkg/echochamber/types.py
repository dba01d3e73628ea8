from typing import Dict, List, Optional, TypedDict


class TrialRow(TypedDict):
    trial: int
    b: float
    h: float
    kind: str
    converged: bool
    failed: bool
    polarization: Optional[float]
    extremism: Optional[float]
    settle_time: Optional[float]


class PolarizationRow(TypedDict):
    b: float
    h: float
    trials: int
    pd_trials: int
    consensus_trials: int
    nonconverged_trials: int
    q05: Optional[float]
    q50: Optional[float]
    q95: Optional[float]
    theory: float


class MonotonicityRow(TypedDict):
    h: float
    t: float
    mean: float
    sd: float
    trials: int


class ConsensusRow(TypedDict):
    b: float
    h: float
    trials: int
    consensus_trials: int
    nonconverged_trials: int
    probability: float
    lower: float
    upper: float


class ExtremismRow(TypedDict):
    b: float
    h: float
    trials: int
    q25: Optional[float]
    q50: Optional[float]
    q75: Optional[float]
    consensus_probability: Optional[float]
    mean_extremism: Optional[float]
    mean_extremism_pd: Optional[float]
    mean_extremism_consensus: Optional[float]


class Manifest(TypedDict):
    command: str
    version: str
    config: Dict
    config_digest: str
    seed: Optional[int]
    outputs: List[str]
    started: str
    finished: str
    wall_time: float
    trials: int
    failed_trials: int
    notes: Dict
