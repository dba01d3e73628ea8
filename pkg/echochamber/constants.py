from __future__ import annotations

from enum import Enum, IntEnum
from typing import List


# Library-level integrator defaults. Experiments override epsilon, see defaults.py
DEFAULT_EPSILON = 1e-3
DEFAULT_STEP = 0.01
DEFAULT_TOL = 1e-6
DEFAULT_WINDOW = 1.0
DEFAULT_HORIZON = 500.0
# step must satisfy step <= epsilon / (STEP_GUARD_FACTOR * max(b))
STEP_GUARD_FACTOR = 10.0
BOX_SLACK = 1e-9
CONSENSUS_TOL_FACTOR = 10.0
BOUNDARY_RTOL = 1e-12
SAMPLE_EVERY = 0.1

OUTPUT_DIR_ENV = "ECHOCHAMBER_OUTPUT_DIR"
LOG_LEVEL_ENV = "ECHOCHAMBER_LOG_LEVEL"
DEFAULT_OUTPUT_DIR = "output"


class ExitCode(IntEnum):
    success = 0
    usage = 2
    numerical_failure = 3
    trial_failures = 4


class Normalization(Enum):
    row_normalized = "row-normalized"
    unit_weight = "unit-weight"

    def __str__(self):
        return self.value

    @classmethod
    def get_from_name(cls, name: str) -> Normalization:
        cleaned = name.strip().lower().replace("_", "-")
        for i in cls:
            if cleaned in (i.value, i.name.replace("_", "-")):
                return i
        if cleaned in ("row", "normalized"):
            return cls.row_normalized
        if cleaned in ("unit", "unweighted"):
            return cls.unit_weight
        raise KeyError(
            "{normalization} is not a valid normalization, select one of {options}".format(
                normalization=name, options=", ".join(i.value for i in cls)
            )
        )


class BlockLabel(Enum):
    left = "L"
    right = "R"
    unlabeled = "-"

    def __str__(self):
        return self.value

    @classmethod
    def get_from_name(cls, name: str) -> BlockLabel:
        cleaned = name.strip()
        for i in cls:
            if cleaned.upper() == i.value or cleaned.lower() == i.name:
                return i
        raise KeyError("{label} is not a valid block label, use L or R".format(label=name))

    @property
    def sign(self) -> int:
        return {BlockLabel.left: -1, BlockLabel.right: 1}.get(self, 0)


class EquilibriumKind(Enum):
    consensus_plus = "ConsensusPlus"
    consensus_minus = "ConsensusMinus"
    persistent_disagreement = "PersistentDisagreement"
    non_convergent = "NonConvergent"
    undetermined = "Undetermined"

    def __str__(self):
        return self.value

    @property
    def is_consensus(self) -> bool:
        return self in (EquilibriumKind.consensus_plus, EquilibriumKind.consensus_minus)

    @property
    def converged(self) -> bool:
        return self.is_consensus or self is EquilibriumKind.persistent_disagreement

    @classmethod
    def get_from_name(cls, name: str) -> EquilibriumKind:
        for i in cls:
            if name in (i.name, i.value):
                return i
        raise KeyError("{kind} is not a valid equilibrium kind".format(kind=name))


class ClassificationKind(Enum):
    pd_c1 = "PD_C1"
    pd_c2 = "PD_C2"
    co_same_sign = "CO_SameSign"
    co_band = "CO_Band"
    boundary = "Boundary"

    def __str__(self):
        return self.value

    @property
    def is_pd(self) -> bool:
        return self in (ClassificationKind.pd_c1, ClassificationKind.pd_c2)

    @property
    def is_co(self) -> bool:
        return self in (ClassificationKind.co_same_sign, ClassificationKind.co_band)

    @classmethod
    def get_from_name(cls, name: str) -> ClassificationKind:
        for i in cls:
            if name in (i.name, i.value):
                return i
        raise KeyError("{kind} is not a valid classification kind".format(kind=name))


class MetricKind(Enum):
    polarization = "polarization"
    extremism = "extremism"
    consensus_indicator = "consensus_indicator"

    def __str__(self):
        return self.value


class ExperimentName(Enum):
    polarization = "polarization"
    monotonicity = "monotonicity"
    consensus_prob = "consensus-prob"
    extremism = "extremism"
    cycle_demo = "cycle-demo"

    def __str__(self):
        return self.value

    @classmethod
    def get_from_name(cls, name: str) -> ExperimentName:
        cleaned = name.strip().lower().replace("_", "-")
        for i in cls:
            if cleaned in (i.value, i.name):
                return i
        raise KeyError(
            "{name} is not a valid experiment, select one of {options}".format(name=name, options=cls.choices())
        )

    @classmethod
    def choices(cls) -> List[str]:
        return [i.value for i in cls]

    @property
    def file_stem(self) -> str:
        return self.value.replace("-", "_")
