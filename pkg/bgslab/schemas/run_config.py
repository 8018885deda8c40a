from enum import Enum
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, field_validator

from bgslab.config import settings
from bgslab.schemas.layout import BlockLayout, SkeletonOptions
from bgslab.schemas.matrix import MatrixKind
from bgslab.schemas.variants import MuscleId, SkeletonId, parse_enum
from bgslab.utils.helpers import parse_sweep, split_names


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"
    SVG = "svg"


class MetricName(str, Enum):
    LOO = "loo"
    REL_RES = "rel_res"
    REL_CHOL_RES = "rel_chol_res"


class KappaPlotKind(str, Enum):
    STANDARD = "standard"
    GLUED = "glued"
    MONOMIAL = "monomial"


def _enum_list(enum_cls, value) -> list:
    return list(dict.fromkeys(parse_enum(enum_cls, name) for name in split_names(value)))


class RunConfig(BaseModel):
    """
    One harness invocation. List fields accept comma-separated strings;
    an empty skeleton list (or "none") runs the muscles column-wise on the
    whole matrix.
    """

    model_config = ConfigDict(frozen=True)

    dims: BlockLayout = Field(default_factory=lambda: settings.default_layout)
    matrices: list[MatrixKind] = Field(default_factory=lambda: [MatrixKind.RAND_NORMAL])
    skeletons: list[SkeletonId] = Field(default_factory=lambda: list(SkeletonId))
    muscles: list[MuscleId] = Field(default_factory=lambda: list(MuscleId))
    options: SkeletonOptions = Field(default_factory=lambda: SkeletonOptions(rpltol=settings.DEFAULT_RPLTOL))
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED)
    output_dir: Path = Field(default_factory=lambda: Path(settings.OUTPUT_DIR))
    formats: list[OutputFormat] = Field(default_factory=lambda: [OutputFormat.CSV, OutputFormat.JSON])
    sweep: list[float] | None = None
    metrics: list[MetricName] = Field(default_factory=lambda: [MetricName.LOO, MetricName.REL_RES])
    workers: int = Field(default_factory=lambda: settings.MAX_WORKERS, ge=1)

    @field_validator("dims", mode="before")
    @classmethod
    def parse_dims(cls, v):
        if isinstance(v, str):
            return BlockLayout.parse(v)
        return v

    @field_validator("matrices", mode="before")
    @classmethod
    def parse_matrices(cls, v):
        return _enum_list(MatrixKind, v)

    @field_validator("skeletons", mode="before")
    @classmethod
    def parse_skeletons(cls, v):
        names = split_names(v)
        if [name.lower() for name in names] == ["none"]:
            return []
        return _enum_list(SkeletonId, names)

    @field_validator("muscles", mode="before")
    @classmethod
    def parse_muscles(cls, v):
        muscles = _enum_list(MuscleId, v)
        if not muscles:
            raise ValueError("at least one muscle is required")
        return muscles

    @field_validator("formats", mode="before")
    @classmethod
    def parse_formats(cls, v):
        return _enum_list(OutputFormat, v)

    @field_validator("metrics", mode="before")
    @classmethod
    def parse_metrics(cls, v):
        metrics = _enum_list(MetricName, v)
        if not metrics:
            raise ValueError("at least one metric is required")
        return metrics

    @field_validator("sweep", mode="before")
    @classmethod
    def parse_sweep_points(cls, v):
        if v is None or isinstance(v, (list, tuple)):
            return v
        return parse_sweep(v)

    @property
    def column_wise(self) -> bool:
        return not self.skeletons

    def wants(self, fmt: OutputFormat) -> bool:
        return fmt in self.formats
