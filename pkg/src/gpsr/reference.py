"""Reference models and statistics for the NHANES body-fat case study.

Four OLS baselines and four symbolic-regression models over the 2017-2018
cohort, with their reported edge complexities and R² scores, the cohort's
published descriptive statistics, and the average-adult measurement profiles
used in the derivative analyses.  These serve as parser/complexity fixtures,
CLI conveniences (``@name`` model references) and reproduction targets.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = [
    "ReferenceModel",
    "REFERENCE_MODELS",
    "GENDER_VALUES",
    "BASELINE_FEATURES",
    "SR_FEATURES",
    "COMPLEXITY_BUDGETS",
    "FEMALE_PROFILE",
    "MALE_PROFILE",
    "WAIST_RANGE",
    "COHORT_SIZE",
    "COHORT_MALES",
    "COHORT_FEMALES",
    "REFERENCE_STATS",
    "TARGET",
    "SR4_MODULE_F",
    "SR4_MODULE_G",
    "SR4_RECOMBINED",
]

TARGET = "DXDTOPF"

# Category values learned for gender in the complexity-17 SR model.
GENDER_VALUES = {"Male": -0.2514210227924248, "Female": 0.24145479395502106}

_GENDER_CASES = (
    "cases{Male: -0.2514210227924248, Female: 0.24145479395502106}(RIAGENDR_cat)"
)

BODY_FEATURES = [
    "BMXWT",
    "BMXHT",
    "BMXLEG",
    "BMXARML",
    "BMXARMC",
    "BMXWAIST",
    "BMXHIP",
]

# Input variables per baseline id (gender enters the OLS fits 0/1-encoded).
BASELINE_FEATURES = {
    1: ["BMXWT", "BMXHT"],
    2: ["BMXWT", "BMXHT"],
    3: list(BODY_FEATURES),
    4: ["RIAGENDR", "RIDAGEYR", *BODY_FEATURES],
}

# The SR runs see gender as a categorical column instead of a 0/1 code.
SR_FEATURES = {
    1: ["BMXWT", "BMXHT"],
    2: ["BMXWT", "BMXHT"],
    3: list(BODY_FEATURES),
    4: ["RIAGENDR_cat", "RIDAGEYR", *BODY_FEATURES],
}

# Edge budget for each SR run = complexity of the matching linear baseline.
COMPLEXITY_BUDGETS = {1: 3, 2: 4, 3: 13, 4: 17}


@dataclass(frozen=True)
class ReferenceModel:
    name: str
    formula: str
    complexity: int
    train_r2: float
    test_r2: float
    features: tuple[str, ...]
    max_complexity: int | None = None


REFERENCE_MODELS: dict[str, ReferenceModel] = {
    m.name: m
    for m in [
        ReferenceModel(
            "baseline1",
            "0.264311*BMXWT - 0.696876*BMXHT + 128.138627",
            3,
            0.563,
            0.590,
            ("BMXWT", "BMXHT"),
        ),
        ReferenceModel(
            "baseline2",
            "0.733466*(BMXWT/(0.01*BMXHT)^2) + 12.084282",
            4,
            0.329,
            0.358,
            ("BMXWT", "BMXHT"),
        ),
        ReferenceModel(
            "baseline3",
            "-0.312160*BMXWT - 0.237978*BMXHT - 0.109314*BMXLEG"
            " + 0.003146*BMXARML - 0.123752*BMXARMC + 0.248836*BMXWAIST"
            " + 0.635005*BMXHIP + 15.689953",
            13,
            0.737,
            0.776,
            tuple(BODY_FEATURES),
        ),
        ReferenceModel(
            "baseline4",
            "-0.169817*BMXWT - 0.103678*BMXHT + 0.075362*BMXLEG"
            " - 0.046780*BMXARML + 0.069824*BMXARMC + 0.318612*BMXWAIST"
            " + 0.249766*BMXHIP + 8.675876*RIAGENDR + 0.007782*RIDAGEYR"
            " - 1.087157",
            17,
            0.820,
            0.843,
            ("RIAGENDR", "RIDAGEYR", *BODY_FEATURES),
        ),
        ReferenceModel(
            "sr1",
            "0.264355*BMXWT - 0.697227*BMXHT + 128.221",
            3,
            0.563,
            0.590,
            ("BMXWT", "BMXHT"),
            max_complexity=3,
        ),
        ReferenceModel(
            "sr2",
            "-0.711635*BMXHT + 20.7829*sqrt(0.0338353*BMXWT - 1) + 125.119",
            4,
            0.569,
            0.603,
            ("BMXWT", "BMXHT"),
            max_complexity=4,
        ),
        ReferenceModel(
            "sr3",
            "533.592*exp(-0.0382652*BMXWAIST)"
            "*(1.34147 - 0.0076698*BMXHT - 0.0124393*BMXLEG"
            " + (0.0731049*BMXWAIST - 3.98442)"
            "*(0.0212026*BMXHIP - 0.012399*BMXWT - 1.35696))"
            " + 44.9658",
            12,
            0.791,
            0.833,
            tuple(BODY_FEATURES),
            max_complexity=13,
        ),
        ReferenceModel(
            "sr4",
            "43.3409 - 10.0751*(2.23561 - 0.0130747*BMXWAIST)"
            "*(0.0174372*BMXWAIST"
            " + (0.0306655*BMXHIP - 5.21981)"
            "*(0.019191*BMXWAIST - 0.0146988*BMXWT - 2.03625)"
            f" + ({_GENDER_CASES} - 0.164541)"
            "*(1.19881*(2.62601 - 0.0694562*BMXARMC)"
            "*(4.57897 - 0.0338513*BMXHT) + 2.14167)"
            " - 3.16342)",
            17,
            0.856,
            0.879,
            ("RIAGENDR_cat", "BMXWT", "BMXHT", "BMXARMC", "BMXWAIST", "BMXHIP"),
            max_complexity=17,
        ),
    ]
}

# The complexity-17 model regrouped as scale * (f + g) + offset: f captures the
# hip/waist/weight interaction, g the gender block plus the waist ramp.
SR4_MODULE_F = (
    "(0.019191*BMXWAIST - 0.0146988*BMXWT - 2.03625)"
    "*(0.0306655*BMXHIP - 5.21981)"
)
SR4_MODULE_G = (
    "0.0174372*BMXWAIST"
    f" + ({_GENDER_CASES} - 0.164541)"
    "*(1.19881*(2.62601 - 0.0694562*BMXARMC)"
    "*(4.57897 - 0.0338513*BMXHT) + 2.14167)"
    " - 3.16342"
)
SR4_RECOMBINED = (
    "-10.0751*(2.23561 - 0.0130747*BMXWAIST)"
    f"*(({SR4_MODULE_F}) + ({SR4_MODULE_G})) + 43.3409"
)

# Average adult measurement profiles used for the waist-derivative analysis.
FEMALE_PROFILE = {
    "BMXWT": 73.95,
    "BMXHT": 160.46,
    "BMXARMC": 31.87,
    "BMXHIP": 106.13,
    "RIAGENDR_cat": "Female",
}
MALE_PROFILE = {
    "BMXWT": 85.97,
    "BMXHT": 173.19,
    "BMXARMC": 34.33,
    "BMXHIP": 102.95,
    "RIAGENDR_cat": "Male",
}

# Observed waist-circumference range (cm) in the cohort.
WAIST_RANGE = (56.4, 154.9)

COHORT_SIZE = 2403
COHORT_MALES = 1158
COHORT_FEMALES = 1245

# Published cohort statistics: mean, std, min, 25%, 50%, 75%, max.
REFERENCE_STATS = {
    "RIDAGEYR": (38.1, 12.6, 18.0, 27.0, 38.0, 49.0, 59.0),
    "BMXWT": (79.7, 20.4, 36.2, 64.9, 76.9, 91.9, 176.5),
    "BMXHT": (166.6, 9.3, 138.3, 159.4, 166.5, 173.8, 190.2),
    "BMXLEG": (39.5, 3.6, 26.0, 37.0, 39.5, 42.0, 50.0),
    "BMXARML": (37.0, 2.7, 29.6, 35.0, 37.0, 39.0, 45.5),
    "BMXARMC": (33.1, 5.1, 20.7, 29.4, 32.9, 36.4, 52.7),
    "BMXWAIST": (96.0, 16.3, 56.4, 83.8, 94.7, 106.4, 154.9),
    "BMXHIP": (104.6, 12.8, 77.8, 95.5, 102.7, 111.6, 168.5),
    "DXDTOPF": (33.1, 8.6, 12.1, 27.1, 32.9, 40.2, 56.1),
}
