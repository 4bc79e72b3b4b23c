"""The 43-feature block-group schema plus the two deployment targets.

Each row records the feature's unit, the spatial granularity of its
source layer, and the legal value range observed statewide. ``policy``
marks the energy-policy features whose coverage is limited to
incorporated jurisdictions; dataset assembly uses the flag to build the
with/without-policy model datasets.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    unit: str
    granularity: str  # block_group | tract | county | zip | jurisdiction | utility
    min_value: float
    max_value: float
    policy: bool = False
    target: bool = False

    def __post_init__(self):
        if self.min_value > self.max_value:
            raise ValueError(f"{self.name}: min {self.min_value} > max {self.max_value}")
        if self.granularity not in (
            "block_group",
            "tract",
            "county",
            "zip",
            "jurisdiction",
            "utility",
        ):
            raise ValueError(f"{self.name}: unknown granularity {self.granularity!r}")

    def in_range(self, value: float) -> bool:
        return self.min_value <= value <= self.max_value


TARGETS: tuple[FeatureSpec, ...] = (
    FeatureSpec("PV Count per HH", "systems/household", "block_group", 0.001, 0.784, target=True),
    FeatureSpec("PV-to-Roof Ratio", "fraction", "block_group", 0.001, 0.259, target=True),
)

FEATURES: tuple[FeatureSpec, ...] = (
    FeatureSpec("% Tree-to-Land Area", "fraction", "block_group", 0.001, 0.052),
    FeatureSpec("Solar Radiation", "kWh/m2/day", "block_group", 4.712, 7.236),
    FeatureSpec("Median HH Income", "USD", "block_group", 14145.0, 250000.0),
    FeatureSpec("Median Age", "years", "block_group", 17.7, 84.6),
    FeatureSpec("% 65+", "fraction", "block_group", 0.001, 1.000),
    FeatureSpec("% Bachelors+", "fraction", "block_group", 0.001, 0.855),
    FeatureSpec("% Renters", "fraction", "block_group", 0.001, 1.000),
    FeatureSpec("Year Structure Built", "year", "block_group", 1939.0, 2014.0),
    FeatureSpec("Avg. No. Bedrooms", "rooms", "block_group", 0.466, 4.524),
    FeatureSpec("Median Home Value", "USD", "block_group", 10000.0, 2000000.0),
    FeatureSpec("Rurality", "code 1-9", "county", 1.0, 9.0),
    FeatureSpec("% Dem. Votes", "fraction", "county", 0.109, 0.796),
    FeatureSpec("% African American", "fraction", "block_group", 0.0, 0.633),
    FeatureSpec("% Hispanic", "fraction", "block_group", 0.0, 0.923),
    FeatureSpec("% Asian", "fraction", "block_group", 0.0, 0.422),
    FeatureSpec("% Other Race", "fraction", "block_group", 0.0, 0.973),
    FeatureSpec("Transmission Volt.", "log kV", "block_group", 0.0, 8.166),
    FeatureSpec("Transmission Length", "log m", "block_group", 0.0, 14.455),
    FeatureSpec("Muni. Utilities", "indicator", "utility", 0.0, 1.0),
    FeatureSpec("Rural Co-Ops", "indicator", "utility", 0.0, 1.0),
    FeatureSpec("Resident. Elec. Rate", "USD/kWh", "zip", 0.062, 0.212),
    FeatureSpec("Commercial Elec. Rate", "USD/kWh", "zip", 0.076, 0.260),
    FeatureSpec("Solar Mandate", "indicator", "jurisdiction", 0.0, 1.0, policy=True),
    FeatureSpec("Net Metering", "indicator", "utility", 0.0, 1.0, policy=True),
    FeatureSpec("SolSmart Awardee", "indicator", "jurisdiction", 0.0, 1.0, policy=True),
    FeatureSpec("Online Permit", "indicator", "jurisdiction", 0.0, 1.0, policy=True),
    FeatureSpec("Sameday InPerson Permit", "indicator", "jurisdiction", 0.0, 1.0, policy=True),
    FeatureSpec("Permit & Pre-Install Days", "business days", "jurisdiction", 8.0, 35.0, policy=True),
    FeatureSpec("Drought Risk", "EAL score", "county", 0.0, 29.35),
    FeatureSpec("Wildfire Risk", "EAL score", "county", 0.0, 48.921),
    FeatureSpec("Hail Risk", "EAL score", "county", 2.583, 64.351),
    FeatureSpec("Winter Weather Risk", "EAL score", "county", 0.0, 62.890),
    FeatureSpec("Strong Wind Risk", "EAL score", "county", 4.107, 59.476),
    FeatureSpec("Tornado Risk", "EAL score", "county", 5.345, 56.195),
    FeatureSpec("% Below Poverty", "fraction", "tract", 0.0, 0.847),
    FeatureSpec("% Disability", "percent", "tract", 0.4, 44.6),
    FeatureSpec("% Single Parent", "percent", "tract", 0.0, 27.600),
    FeatureSpec("% Limited English", "percent", "tract", 0.0, 37.700),
    FeatureSpec("% 10+ Unit Housing", "percent", "tract", 0.0, 98.900),
    FeatureSpec("% Mobile Homes", "percent", "tract", 0.0, 79.100),
    FeatureSpec("% Ppl. > Rooms", "percent", "tract", 0.0, 24.800),
    FeatureSpec("% No Vehicle", "percent", "tract", 0.0, 43.300),
    FeatureSpec("% Unemployed", "percent", "tract", 0.0, 28.400),
)

SVI_FEATURES: tuple[str, ...] = (
    "% Below Poverty",
    "% Disability",
    "% Single Parent",
    "% Limited English",
    "% 10+ Unit Housing",
    "% Mobile Homes",
    "% Ppl. > Rooms",
    "% No Vehicle",
    "% Unemployed",
)

POLICY_FEATURES: tuple[str, ...] = tuple(f.name for f in FEATURES if f.policy)


@dataclass(frozen=True)
class Schema:
    """Validated collection of feature specs (features first, then targets)."""

    rows: tuple[FeatureSpec, ...]

    def __post_init__(self):
        names = [r.name for r in self.rows]
        if len(set(names)) != len(names):
            raise ValueError("duplicate schema feature names")

    @property
    def feature_rows(self) -> tuple[FeatureSpec, ...]:
        return tuple(r for r in self.rows if not r.target)

    @property
    def target_rows(self) -> tuple[FeatureSpec, ...]:
        return tuple(r for r in self.rows if r.target)

    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.rows)

    def by_name(self, name: str) -> FeatureSpec:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)


TABLE_SCHEMA = Schema(FEATURES + TARGETS)

assert len(FEATURES) == 43, f"expected 43 features, have {len(FEATURES)}"


def feature_names() -> tuple[str, ...]:
    return tuple(f.name for f in FEATURES)


def target_names() -> tuple[str, ...]:
    return tuple(t.name for t in TARGETS)
