from enum import Enum


class AaaState(str, Enum):
    DEAD = "dead"
    NO_AAA = "no-AAA"
    LT_30 = "<30mm"
    MM_30_35 = "30-35mm"
    MM_35_40 = "35-40mm"
    MM_40_45 = "40-45mm"
    MM_45_50 = "45-50mm"
    MM_50_55 = "50-55mm"
    MM_55_60 = "55-60mm"
    MM_60_65 = "60-65mm"
    MM_65_70 = "65-70mm"
    MM_70_75 = "70-75mm"
    MM_75_80 = "75-80mm"
    GT_80 = ">80mm"


class AaaAction(str, Enum):
    # Listed first so ties favour non-intervention
    CONTINUE_SURVEILLANCE = "continue-surveillance"
    PERFORM_SURGERY = "perform-surgery"


class GridKind(str, Enum):
    POLICY = "policy"
    VALUE = "value"
    GAIN = "gain"
    RATIO = "ratio"


class TerminalMode(str, Enum):
    QALY = "qaly"
    ZERO = "zero"


class ParameterFamily(str, Enum):
    RUPTURE_PROB = "rupture_prob"
    GROWTH = "growth"
    QALY_WEIGHT = "qaly_weight"
    BACKGROUND_MORTALITY = "background_mortality"
    ELECTIVE_MORTALITY = "elective_mortality"
    EMERGENCY_MORTALITY = "emergency_mortality"
    REACH_HOSPITAL_PROB = "reach_hospital_prob"


DIAMETER_BINS = [s for s in AaaState if s not in (AaaState.DEAD, AaaState.NO_AAA)]
BIN_LABELS = [s.value for s in DIAMETER_BINS]
AGE_FAMILIES = [
    ParameterFamily.QALY_WEIGHT,
    ParameterFamily.BACKGROUND_MORTALITY,
    ParameterFamily.ELECTIVE_MORTALITY,
    ParameterFamily.EMERGENCY_MORTALITY,
]
