"""Modelos Pydantic compartilhados: rede, mistura, otimização, dados, avaliação e execução."""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _split_ints(value: Any) -> Any:
    """Aceita '0,1,2' vindo do arquivo key=value além de listas."""
    if isinstance(value, str):
        return [int(v) for v in value.split(",") if v.strip()]
    return value


# --- Rede ------------------------------------------------------------------

class BlockSpec(BaseModel):
    in_channels: int = Field(..., gt=0, description="Canais de entrada do bloco")
    out_channels: int = Field(..., gt=0, description="Canais de saída (filtros) do bloco")
    kernel: int = Field(default=3, gt=0)
    stride: int = Field(default=1, gt=0)
    padding: int = Field(default=1, ge=0)
    bias: bool | None = Field(default=None, description="Bias da convolução (padrão: só sem BatchNorm)")
    norm: Literal["batch", "none"] = "batch"
    activation: Literal["relu", "none"] = "relu"
    residual: bool = False
    pool: Literal["max", "avg"] | None = None
    pool_window: int = Field(default=2, gt=0)

    @model_validator(mode="after")
    def _default_bias(self) -> BlockSpec:
        # BatchNorm cancela um bias por canal
        if self.bias is None:
            self.bias = self.norm != "batch"
        return self


class NetworkSpec(BaseModel):
    name: str = Field(..., description="Nome do preset (ex: 'tiny-4')")
    in_channels: int = Field(default=3, gt=0)
    num_classes: int = Field(..., ge=2)
    blocks: list[BlockSpec] = Field(default_factory=list)

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    @property
    def latent_dim(self) -> int:
        return self.blocks[-1].out_channels

    def boundary_channels(self, k: int) -> int:
        """Canais na fronteira k (k=0 é a própria entrada)."""
        return self.in_channels if k == 0 else self.blocks[k - 1].out_channels


class NetworkConfig(BaseModel):
    name: str = "tiny-4"
    init_seed: int | None = None


# --- Mistura ----------------------------------------------------------------

class MixConfig(BaseModel):
    strategy: Literal["catchup", "random_channel", "none"] = "catchup"
    alpha: float = Field(default=10.0, gt=0, description="Concentração da Beta(α, α)")
    layer_set: list[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4, 5], min_length=1)
    input_mix_kind: Literal["cutmix", "input_mixup", "none"] = "cutmix"
    prob: float = Field(default=1.0, ge=0.0, le=1.0, description="Probabilidade de misturar na iteração")
    audit: bool = False

    _layers = field_validator("layer_set", mode="before")(_split_ints)

    @field_validator("layer_set")
    @classmethod
    def _non_negative(cls, value: list[int]) -> list[int]:
        if any(k < 0 for k in value):
            raise ValueError("índices de fronteira devem ser ≥ 0")
        return value


# --- Otimização e treino ------------------------------------------------------

class OptimConfig(BaseModel):
    lr: float = Field(default=0.1, gt=0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    weight_decay: float = Field(default=5e-4, ge=0.0)
    schedule: Literal["cosine", "step"] = "cosine"
    milestones: list[int] = Field(default_factory=list)
    gamma: float = Field(default=0.1, gt=0)

    _milestones = field_validator("milestones", mode="before")(_split_ints)


class TrainConfig(BaseModel):
    epochs: int = Field(default=60, ge=1)
    batch_size: int = Field(default=64, ge=1)
    eval_every: int = Field(default=1, ge=1)
    seed: int = 0


# --- Dados -------------------------------------------------------------------

class DataConfig(BaseModel):
    source: Literal["synthetic", "disk"] = "synthetic"
    root: str | None = Field(default=None, description="Diretório com train/, val/ e test/")
    classes: int = Field(default=8, ge=2)
    per_class_train: int = Field(default=500, ge=1)
    per_class_val: int = Field(default=50, ge=1)
    per_class_test: int = Field(default=100, ge=1)
    image_size: int = Field(default=32, ge=8)
    seed: int | None = None
    format: Literal["packed", "png"] = "packed"
    augment: bool = True

    @model_validator(mode="after")
    def _root_for_disk(self) -> DataConfig:
        if self.source == "disk" and not self.root:
            raise ValueError("data.root é obrigatório quando data.source=disk")
        return self


class DeformSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["rotate", "shear", "zoom"]
    magnitude: float = Field(..., description="Graus (rotate/shear) ou percentual (zoom)")
    randomized: bool = Field(default=False, description="Sorteia por imagem em [−m, +m]")

    @model_validator(mode="after")
    def _zoom_positive(self) -> DeformSpec:
        if self.kind == "zoom" and self.magnitude <= 0:
            raise ValueError("zoom exige percentual > 0")
        return self

    @property
    def label(self) -> str:
        return f"{self.kind}_{self.magnitude:g}"


class CorruptionSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["gaussian_noise", "gaussian_blur", "brightness", "contrast"]
    severity: int = Field(..., ge=1, le=5)

    @property
    def label(self) -> str:
        return f"{self.kind}_s{self.severity}"


# --- Avaliação e execução -------------------------------------------------------

class EvalConfig(BaseModel):
    seed: int = 1234
    batch_size: int = Field(default=128, ge=1)
    fgsm_epsilon: float = Field(default=4 / 255, ge=0.0)


class RunConfig(BaseModel):
    """Descrição completa de um experimento."""
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    mix: MixConfig = Field(default_factory=MixConfig)
    optim: OptimConfig = Field(default_factory=OptimConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    @model_validator(mode="after")
    def _batch_for_mixing(self) -> RunConfig:
        if self.mix.strategy != "none" and self.train.batch_size < 2:
            raise ValueError("train.batch_size deve ser ≥ 2 quando a mistura está ativa")
        return self

    @property
    def data_seed(self) -> int:
        return self.data.seed if self.data.seed is not None else self.train.seed

    @property
    def init_seed(self) -> int:
        return self.network.init_seed if self.network.init_seed is not None else self.train.seed


class RobustnessReport(BaseModel):
    clean_accuracy: float = Field(..., ge=0.0, le=100.0)
    fgsm_epsilon: float | None = None
    fgsm_accuracy: float | None = Field(default=None, ge=0.0, le=100.0)
    deformation: dict[str, float] = Field(default_factory=dict)
    corruption_errors: dict[str, list[float]] = Field(default_factory=dict)
    mean_corruption_error: float | None = None


class OODReport(BaseModel):
    fpr95: float = Field(..., ge=0.0, le=1.0)
    auroc: float = Field(..., ge=0.0, le=1.0)
    aupr: float = Field(..., ge=0.0, le=1.0)
    n_in: int = 0
    n_out: int = 0


class RunManifest(BaseModel):
    command: str
    tool_version: str
    config: dict[str, Any] = Field(default_factory=dict)
    seed: int | None = None
    started_at: str
    finished_at: str | None = None
    status: Literal["running", "ok", "failed"] = "running"
    exit_code: int | None = None
    artifacts: list[str] = Field(default_factory=list)
