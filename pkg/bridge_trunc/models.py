"""
Pydantic models for experiment configuration, reports and API schemas
"""
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from .config import settings
from .core.ensembles import EnsembleKind

Point = Tuple[float, float]


class Statistic(str, Enum):
    ONE_PARAM_DETERMINISTIC = "OneParamDeterministic"
    ONE_PARAM_ANNEALED = "OneParamAnnealed"
    ONE_PARAM_QUENCHED = "OneParamQuenched"
    DET_TRUNC_CENTERED = "DetTruncCentered"
    RAND_TRUNC_ANNEALED = "RandTruncAnnealed"
    V_QUENCHED = "VQuenched"
    SUBORDINATED_W = "SubordinatedW"
    PERMUTATION_ANNEALED = "PermutationAnnealed"
    PERMUTATION_QUENCHED = "PermutationQuenched"
    EMPIRICAL_COPULA = "EmpiricalCopula"
    DFT_ANNEALED = "DftAnnealed"
    CONJECTURE_PROBE_1 = "ConjectureProbe1"
    CONJECTURE_PROBE_2 = "ConjectureProbe2"


class Mode(str, Enum):
    ANNEALED = "Annealed"
    QUENCHED_OMEGA = "QuenchedOmega"
    QUENCHED_U = "QuenchedU"


class ExperimentConfig(BaseModel):
    """One Monte-Carlo experiment; echoed verbatim in its report"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    ensemble: EnsembleKind
    statistic: Statistic
    n: int = Field(default_factory=lambda: settings.default_n, ge=1)
    grid_m: int = Field(default_factory=lambda: settings.default_grid_m, ge=1)
    replicates: int = Field(default_factory=lambda: settings.default_replicates, ge=2)
    mode: Mode = Mode.ANNEALED
    master_seed: int = Field(ge=0)
    test_points: Optional[List[Point]] = None
    z_threshold: float = Field(default_factory=lambda: settings.z_threshold, gt=0)
    batches: int = Field(default_factory=lambda: settings.batches, ge=2)
    identity_permutation: bool = False
    fast_path: bool = True


class PointSummary(BaseModel):
    point: Point
    mean: float
    se: float


class Comparison(BaseModel):
    """One covariance entry: empirical vs exact finite-n target (and the limit)"""

    p: Point
    q: Point
    empirical: float
    se: float
    target: float
    limit: float
    z: Optional[float]
    passed: bool


class GaussianityDiagnostic(BaseModel):
    point: Point
    fourth_moment: float
    target: float = 3.0


class ExperimentReport(BaseModel):
    config: ExperimentConfig
    kernel: str
    se_method: str
    means: List[PointSummary]
    comparisons: List[Comparison]
    max_abs_z: Optional[float]
    worst_pair: Optional[Tuple[Point, Point]]
    degenerate: bool
    verdict: Optional[bool]
    gaussianity: Optional[GaussianityDiagnostic] = None
    notes: List[str] = []
    runtime_seconds: float = Field(default=0.0, exclude=True)


class KsComparison(BaseModel):
    point: Point
    ks_statistic: float
    p_value: float
    mean_random: float
    se_random: float
    mean_subordinated: float
    se_subordinated: float
    z: Optional[float]
    passed: bool


class SubordinationReport(BaseModel):
    config: ExperimentConfig
    ks_alpha: float
    points: List[KsComparison]
    verdict: bool
    notes: List[str] = []
    runtime_seconds: float = Field(default=0.0, exclude=True)


class ProbeRow(BaseModel):
    label: str
    n: int
    s: Optional[float] = None
    t: Optional[float] = None
    estimate: float
    se: float
    target: Optional[float] = None
    limit: Optional[float] = None
    z: Optional[float] = None
    max_abs_z: Optional[float] = None
    fourth_moment: Optional[float] = None


class ProbeReport(BaseModel):
    probe: str
    ensemble: EnsembleKind
    replicates: int
    seed: int
    rows: List[ProbeRow]
    verdict: Optional[bool]
    warnings: List[str] = []
    notes: List[str] = []
    runtime_seconds: float = Field(default=0.0, exclude=True)


class CliConfig(BaseModel):
    """JSON document accepted by --config; every field may be overridden by a flag"""

    model_config = ConfigDict(extra="forbid")

    ensemble: Optional[EnsembleKind] = None
    statistic: Optional[Statistic] = None
    mode: Optional[Mode] = None
    n: Optional[int] = Field(default=None, ge=1)
    grid_m: Optional[int] = Field(default=None, ge=1)
    replicates: Optional[int] = Field(default=None, ge=2)
    seed: Optional[int] = Field(default=None, ge=0)
    test_points: Optional[List[Point]] = None
    z_threshold: Optional[float] = Field(default=None, gt=0)
    batches: Optional[int] = Field(default=None, ge=2)
    identity_permutation: Optional[bool] = None
    fast_path: Optional[bool] = None
    out_dir: Optional[str] = None
    threads: Optional[int] = Field(default=None, ge=1)

    def experiment_overrides(self) -> Dict[str, Any]:
        """Fields that map onto ExperimentConfig"""
        fields = self.model_dump(exclude_none=True, exclude={"out_dir", "threads", "seed"})
        if self.seed is not None:
            fields["master_seed"] = self.seed
        return fields


class SampleRequest(BaseModel):
    ensemble: EnsembleKind
    n: int = Field(ge=1, le=512)
    seed: int = Field(ge=0)


class WeightEntry(BaseModel):
    i: int
    j: int
    w: float


class SampleResponse(BaseModel):
    success: bool
    ensemble: EnsembleKind
    n: int
    entries: List[WeightEntry]


class VerifyRequest(BaseModel):
    preset: str
    overrides: CliConfig = CliConfig()


class ProbeRequest(BaseModel):
    probe: str
    ensemble: EnsembleKind = EnsembleKind.UNITARY
    n: List[int] = [100]
    seed: int = Field(ge=0)
    replicates: Optional[int] = Field(default=None, ge=2)
    s: float = 0.5
    t: float = 0.5


class ErrorResponse(BaseModel):
    """Standard error response model"""
    success: bool = False
    error: str
    details: Optional[str] = None
