"""
Validated experiment configuration.
"""

from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from env import DEFAULT_SEED


class PotentialSpec(BaseModel):
    """Potential V(x) >= 0 added to -d^2/dx^2 on [0, 1]."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["zero", "quadratic", "tabulated"] = "zero"
    # quadratic well c * (x - 1/2)^2
    strength: float = Field(0.0, ge=0.0)
    positions: Optional[Tuple[float, ...]] = None
    values: Optional[Tuple[float, ...]] = None
    source: Optional[str] = None

    @model_validator(mode="after")
    def _check_kind(self) -> "PotentialSpec":
        if self.kind == "tabulated":
            if not self.values:
                raise ValueError("tabulated potential needs values")
            if self.positions is not None and len(self.positions) != len(self.values):
                raise ValueError(
                    f"tabulated potential has {len(self.positions)} positions but {len(self.values)} values"
                )
            negative = [v for v in self.values if v < 0]
            if negative:
                raise ValueError(f"potential must be non-negative, found {negative[0]}")
        elif self.values is not None or self.positions is not None:
            raise ValueError(f"'{self.kind}' potential does not take tabulated values")
        if self.kind == "zero" and self.strength != 0.0:
            raise ValueError("zero potential does not take a strength")
        return self

    @property
    def label(self) -> str:
        if self.kind == "quadratic":
            return f"quad:{self.strength:g}"
        if self.kind == "tabulated":
            return f"file:{self.source}" if self.source else "tabulated"
        return "zero"


class PhaseConfig(BaseModel):
    """Phase-estimation register settings. An explicit b overrides choose_b(n, epsilon)."""

    model_config = ConfigDict(extra="forbid")

    n: int = Field(8, ge=1, description="target accuracy bits")
    epsilon: float = Field(0.25, gt=0.0, lt=1.0)
    b: Optional[int] = Field(None, ge=1)
    evolution_time: Optional[float] = Field(None, gt=0.0)

    @model_validator(mode="after")
    def _check_bits(self) -> "PhaseConfig":
        if self.b is not None and self.b < self.n:
            if "n" in self.model_fields_set:
                raise ValueError(f"b={self.b} must be >= n={self.n}")
            self.n = self.b
        return self


class ExperimentConfig(BaseModel):
    """One coarse-to-fine experiment: which operator, which eigenvector, which grids, which register."""

    model_config = ConfigDict(extra="forbid")

    potential: PotentialSpec = Field(default_factory=PotentialSpec)
    k: int = Field(0, ge=0)
    n0_list: List[int] = Field(..., min_length=1)
    s: Optional[int] = Field(None, ge=0)
    fine_n: Optional[int] = Field(None, ge=2)
    qpe: PhaseConfig = Field(default_factory=PhaseConfig)
    shots: int = Field(0, ge=0)
    rng_seed: int = Field(default_factory=lambda: DEFAULT_SEED, ge=0)
    noise: float = Field(0.0, ge=0.0, lt=1.0)

    @field_validator("n0_list")
    @classmethod
    def _check_n0(cls, value: List[int]) -> List[int]:
        small = [n for n in value if n < 2]
        if small:
            raise ValueError(f"coarse sizes must be >= 2, got {small[0]}")
        if len(set(value)) != len(value):
            raise ValueError("coarse sizes must be distinct")
        return value

    @model_validator(mode="after")
    def _check_grids(self) -> "ExperimentConfig":
        if self.s is not None and self.fine_n is not None:
            raise ValueError("give either s or fine_n, not both")
        if self.k >= min(self.n0_list):
            raise ValueError(f"k={self.k} does not exist on the coarsest grid N0={min(self.n0_list)}")
        if self.fine_n is not None:
            for n0 in self.n0_list:
                self.doubling_count(n0)
        return self

    def doubling_count(self, n0: int) -> int:
        """s such that N = 2^s * N0 for this coarse size."""
        if self.fine_n is None:
            return self.s or 0
        ratio, rem = divmod(self.fine_n, n0)
        if rem or ratio < 1 or ratio & (ratio - 1):
            raise ValueError(f"fine_n={self.fine_n} is not 2^s * N0 for N0={n0}")
        return ratio.bit_length() - 1

    def points(self) -> List[Tuple[int, int, int]]:
        """(N0, s, N) triples ordered by (N0, s)."""
        pts = []
        for n0 in self.n0_list:
            s = self.doubling_count(n0)
            pts.append((n0, s, n0 << s))
        return sorted(pts)
