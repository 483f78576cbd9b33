"""
Purpose: Load, validate, normalize and partition measurement profiles.

    A profile is one contiguous recorded drive cycle. Its values are kept normalized
    (plain division by a per-channel divisor) in the column order
    exogenous | ancillary | targets, i.e. [xi | ancillary temperatures | target temperatures].
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .const import (
    CSV_ENCODING,
    DEFAULT_ANCILLARY,
    DEFAULT_DIVISORS,
    DEFAULT_EXOGENOUS,
    DEFAULT_SAMPLE_TIME,
    DEFAULT_TARGETS,
    FOLD_ROLES,
    PROFILE_ID_COLUMN,
    ROLE_FOLD_1,
    ROLE_FOLD_2,
    ROLE_GENERALIZATION,
    ROLE_TRAIN,
    TEMPERATURE_DIVISOR,
    VECTOR_NORM_COMPONENTS,
)
from .tnn_exceptions import ArgumentError, NumericalError, ParseError, PlanError, SchemaError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChannelSchema:
    """
    Names and normalization of all channels of a measurement file.

    exogenous: observables xi (o entries), e.g. u_s, i_s, motor_speed
    ancillary: measured boundary temperatures (n entries), e.g. ambient, coolant
    targets: temperatures to estimate (m entries)
    divisors: channel name -> divisor in channel units
    sample_time: T_s in seconds
    """

    exogenous: tuple
    ancillary: tuple
    targets: tuple
    divisors: dict
    sample_time: float
    profile_column: str = PROFILE_ID_COLUMN

    def __post_init__(self):
        object.__setattr__(self, "exogenous", tuple(self.exogenous))
        object.__setattr__(self, "ancillary", tuple(self.ancillary))
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "divisors", dict(self.divisors))

        if not self.targets:
            raise SchemaError("at least one target channel is required")
        seen = set()
        for name in self.channels + (self.profile_column,):
            if name in seen:
                raise SchemaError("channel name {!r} is used twice".format(name), column=name)
            seen.add(name)
        for name in self.channels:
            divisor = self.divisors.get(name)
            if divisor is None:
                raise SchemaError("no divisor for channel {!r}".format(name), column=name)
            if not np.isfinite(divisor) or divisor <= 0.0:
                raise SchemaError(
                    "divisor of channel {!r} must be positive, got {}".format(name, divisor),
                    column=name,
                )
        if not self.sample_time > 0.0:
            raise SchemaError("sample time must be positive, got {}".format(self.sample_time))

    @property
    def channels(self):
        return self.exogenous + self.ancillary + self.targets

    @property
    def o(self):
        return len(self.exogenous)

    @property
    def n(self):
        return len(self.ancillary)

    @property
    def m(self):
        return len(self.targets)

    @property
    def divisor_vector(self):
        return np.array([self.divisors[name] for name in self.channels], dtype=np.float64)

    @property
    def target_divisors(self):
        return np.array([self.divisors[name] for name in self.targets], dtype=np.float64)

    @property
    def ancillary_divisors(self):
        return np.array([self.divisors[name] for name in self.ancillary], dtype=np.float64)

    def to_dict(self):
        return {
            "exogenous": list(self.exogenous),
            "ancillary": list(self.ancillary),
            "targets": list(self.targets),
            "divisors": {name: float(self.divisors[name]) for name in self.channels},
            "sample_time": float(self.sample_time),
            "profile_column": self.profile_column,
        }

    @classmethod
    def from_dict(cls, raw):
        return cls(
            exogenous=raw["exogenous"],
            ancillary=raw["ancillary"],
            targets=raw["targets"],
            divisors=raw["divisors"],
            sample_time=raw["sample_time"],
            profile_column=raw.get("profile_column", PROFILE_ID_COLUMN),
        )


def make_schema(
    exogenous=DEFAULT_EXOGENOUS,
    ancillary=DEFAULT_ANCILLARY,
    targets=DEFAULT_TARGETS,
    divisors=None,
    sample_time=DEFAULT_SAMPLE_TIME,
    profile_column=PROFILE_ID_COLUMN,
):
    """
    Builds a schema, filling in divisors that are not given: temperatures are divided by
    100 degC, known observables use the motor dataset values.
    """
    resolved = {}
    for name in tuple(ancillary) + tuple(targets):
        resolved[name] = TEMPERATURE_DIVISOR
    for name in exogenous:
        if name in DEFAULT_DIVISORS:
            resolved[name] = DEFAULT_DIVISORS[name]
    resolved.update(divisors or {})
    return ChannelSchema(
        exogenous=exogenous,
        ancillary=ancillary,
        targets=targets,
        divisors=resolved,
        sample_time=sample_time,
        profile_column=profile_column,
    )


@dataclass(frozen=True, eq=False)
class MeasurementProfile:
    """One contiguous recorded drive cycle, normalized, columns in schema channel order"""

    profile_id: str
    values: np.ndarray
    schema: ChannelSchema = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != len(self.schema.channels):
            raise SchemaError(
                "profile {} has shape {}, expected (K, {})".format(
                    self.profile_id, values.shape, len(self.schema.channels)
                )
            )
        if values.shape[0] < 2:
            raise ArgumentError(
                "profile {} has {} sample(s), at least 2 are required".format(
                    self.profile_id, values.shape[0]
                )
            )
        if not np.all(np.isfinite(values)):
            raise NumericalError("profile {} contains non-finite values".format(self.profile_id))
        values.flags.writeable = False
        object.__setattr__(self, "profile_id", str(self.profile_id))
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]

    def __repr__(self):
        return "<MeasurementProfile {} K={}>".format(self.profile_id, len(self))

    @property
    def length(self):
        return self.values.shape[0]

    @property
    def exogenous(self):
        return self.values[:, : self.schema.o]

    @property
    def ancillary(self):
        o = self.schema.o
        return self.values[:, o : o + self.schema.n]

    @property
    def targets(self):
        return self.values[:, self.schema.o + self.schema.n :]

    @property
    def phi(self):
        """Non-state network input [ancillary temperatures, xi] per sample"""
        return np.hstack([self.ancillary, self.exogenous])

    def window(self, start, stop, suffix=None):
        """Profile made of samples start..stop-1"""
        profile_id = self.profile_id if suffix is None else "{}/{}".format(self.profile_id, suffix)
        return MeasurementProfile(profile_id, self.values[start:stop], self.schema)


def normalize(values, divisors):
    return np.asarray(values, dtype=np.float64) / np.asarray(divisors, dtype=np.float64)


def denormalize(values, divisors):
    return np.asarray(values, dtype=np.float64) * np.asarray(divisors, dtype=np.float64)


def derive_vector_norms(u_d, u_q, i_d, i_q):
    """
    Voltage and current vector norms from their d/q components
    :return tuple: (u_s, i_s)
    """
    return np.hypot(u_d, u_q), np.hypot(i_d, i_q)


def _numeric_column(frame, column):
    numeric = pd.to_numeric(frame[column], errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(numeric)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise ParseError(
            "non-numeric or missing value {!r} in column {} at row {}".format(
                frame[column].iloc[row], column, row
            ),
            row=row,
            column=column,
        )
    return numeric


def _resolve_channel(frame, name, used):
    if name in frame.columns:
        used.add(name)
        return _numeric_column(frame, name)

    components = VECTOR_NORM_COMPONENTS.get(name)
    if components and all(component in frame.columns for component in components):
        used.update(components)
        first, second = (_numeric_column(frame, component) for component in components)
        return np.hypot(first, second)

    raise SchemaError("missing column {!r}".format(name), column=name)


def ingest_csv(path, schema):
    """
    Reads a measurement file and groups its rows into normalized profiles.
    Rows of one profile keep their file order; profiles are returned in order of first
    appearance, so the same file always gives the same profile set.
    :param str path: CSV file with a header row and a profile id column
    :param ChannelSchema schema: channels to read
    :return list: MeasurementProfile objects
    """
    frame = pd.read_csv(path, encoding=CSV_ENCODING, dtype=str, keep_default_na=False)
    frame.columns = [column.strip() for column in frame.columns]
    if schema.profile_column not in frame.columns:
        raise SchemaError(
            "missing column {!r}".format(schema.profile_column), column=schema.profile_column
        )

    used = {schema.profile_column}
    raw = np.column_stack([_resolve_channel(frame, name, used) for name in schema.channels])
    ignored = [column for column in frame.columns if column not in used]
    if ignored:
        logger.warning("ignoring columns not in the schema: %s", ", ".join(ignored))

    ids = frame[schema.profile_column].str.strip().to_numpy()
    empty = np.flatnonzero(ids == "")
    if empty.size:
        raise ParseError(
            "missing profile id at row {}".format(int(empty[0])),
            row=int(empty[0]),
            column=schema.profile_column,
        )

    values = normalize(raw, schema.divisor_vector)
    profiles = []
    for profile_id in pd.unique(ids):
        rows = np.flatnonzero(ids == profile_id)
        if rows.size < 2:
            raise ParseError(
                "profile {} has {} sample(s), at least 2 are required".format(
                    profile_id, rows.size
                ),
                row=int(rows[0]),
            )
        profiles.append(MeasurementProfile(str(profile_id), values[rows], schema))
    return profiles


def write_profiles_csv(profiles, path):
    """Writes profiles in physical units, readable again with ingest_csv"""
    frames = []
    for profile in profiles:
        schema = profile.schema
        frame = pd.DataFrame(
            denormalize(profile.values, schema.divisor_vector), columns=list(schema.channels)
        )
        frame.insert(0, schema.profile_column, profile.profile_id)
        frames.append(frame)
    pd.concat(frames, ignore_index=True).to_csv(path, index=False, encoding=CSV_ENCODING)


def split_subsequences(profile, length):
    """
    Splits a profile into consecutive non-overlapping windows that are treated as independent
    records. A trailing remainder is kept when it has at least 2 samples.
    :param MeasurementProfile profile: the profile to split
    :param int length: window length in samples
    """
    if length < 2:
        raise ArgumentError("subsequence length must be at least 2, got {}".format(length))
    pieces = []
    for index, start in enumerate(range(0, len(profile), length)):
        stop = min(start + length, len(profile))
        if stop - start < 2:
            break
        pieces.append(profile.window(start, stop, suffix=index))
    return pieces


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of each profile id to exactly one of train, fold-1, fold-2, generalization"""

    assignment: dict

    def __post_init__(self):
        assignment = {str(key): value for key, value in dict(self.assignment).items()}
        for profile_id, role in assignment.items():
            if role not in FOLD_ROLES:
                raise PlanError("profile {} has unknown role {!r}".format(profile_id, role))
        for role in (ROLE_FOLD_1, ROLE_FOLD_2, ROLE_GENERALIZATION):
            if role not in assignment.values():
                raise PlanError("the {} set is empty".format(role))
        object.__setattr__(self, "assignment", assignment)

    @classmethod
    def from_sets(cls, train=(), fold_1=(), fold_2=(), generalization=()):
        assignment = {}
        for role, ids in (
            (ROLE_TRAIN, train),
            (ROLE_FOLD_1, fold_1),
            (ROLE_FOLD_2, fold_2),
            (ROLE_GENERALIZATION, generalization),
        ):
            for profile_id in ids:
                profile_id = str(profile_id)
                if profile_id in assignment:
                    raise PlanError(
                        "profile {} is assigned to both {} and {}".format(
                            profile_id, assignment[profile_id], role
                        )
                    )
                assignment[profile_id] = role
        return cls(assignment)

    def ids(self, role):
        return tuple(key for key, value in self.assignment.items() if value == role)


@dataclass(frozen=True)
class FoldSets:
    """
    Disjoint profile sets. Iteration 1 validates on fold-1 and tests on fold-2, iteration 2
    swaps both; the generalization set never enters training or validation.
    """

    train: tuple
    fold_1: tuple
    fold_2: tuple
    generalization: tuple

    def iteration(self, k):
        """:return tuple: (validation profiles, test profiles) of iteration k"""
        if k == 1:
            return self.fold_1, self.fold_2
        if k == 2:
            return self.fold_2, self.fold_1
        raise ArgumentError("cross-validation iteration must be 1 or 2, got {}".format(k))

    def all_profiles(self):
        return self.train + self.fold_1 + self.fold_2 + self.generalization


def make_folds(profiles, plan):
    """
    Partitions profiles according to the plan
    :param list profiles: MeasurementProfile objects with unique ids
    :param FoldPlan plan: the assignment
    :return FoldSets: the four disjoint sets
    """
    sets = {role: [] for role in FOLD_ROLES}
    seen = set()
    for profile in profiles:
        if profile.profile_id in seen:
            raise PlanError("profile id {} occurs twice".format(profile.profile_id))
        seen.add(profile.profile_id)
        role = plan.assignment.get(profile.profile_id)
        if role is None:
            raise PlanError("profile {} is not assigned by the fold plan".format(profile.profile_id))
        sets[role].append(profile)

    missing = sorted(set(plan.assignment) - seen)
    if missing:
        logger.warning("fold plan names profiles without data: %s", ", ".join(missing))
    for role in (ROLE_FOLD_1, ROLE_FOLD_2, ROLE_GENERALIZATION):
        if not sets[role]:
            raise PlanError("the {} set is empty".format(role))

    return FoldSets(
        train=tuple(sets[ROLE_TRAIN]),
        fold_1=tuple(sets[ROLE_FOLD_1]),
        fold_2=tuple(sets[ROLE_FOLD_2]),
        generalization=tuple(sets[ROLE_GENERALIZATION]),
    )
