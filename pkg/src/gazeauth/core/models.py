from typing import Any, Dict, List, Literal, Optional, Tuple
try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self
from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator, model_validator


Eye = Literal["L", "R"]
Axis = Literal["O", "V", "VminusO"]
TaskKind = Literal["random_saccade", "smooth_pursuit"]
Split = Literal["train", "test"]

EYE_ORDER: Tuple[str, ...] = ("L", "R")
AXIS_ORDER: Tuple[str, ...] = ("O", "V", "VminusO")
COMPONENTS: Tuple[str, ...] = ("az", "el")


# ---------- Signal ----------
class ChannelSpec(BaseModel):
    """
    Which eyes and axes feed the network. Channel order is eye-major, axis-minor,
    azimuth before elevation: L.O.az, L.O.el, L.V.az, ..., R.VminusO.el.
    """
    model_config = ConfigDict(frozen=True)

    eyes: List[Eye] = Field(default_factory=lambda: ["L", "R"])
    axes: List[Axis] = Field(default_factory=lambda: ["O", "V"])

    @field_validator("eyes", "axes")
    @classmethod
    def canonical_order(cls, value: List[str], info: ValidationInfo) -> List[str]:
        if not value:
            raise ValueError(f"{info.field_name} must be nonempty")
        if len(set(value)) != len(value):
            raise ValueError(f"{info.field_name} must not repeat")
        # {R,L} and {L,R} describe the same channels
        order = EYE_ORDER if info.field_name == "eyes" else AXIS_ORDER
        return [v for v in order if v in value]

    @property
    def channel_count(self) -> int:
        return 2 * len(self.eyes) * len(self.axes)

    @property
    def channel_names(self) -> List[str]:
        return [f"{e}.{a}.{c}" for e in self.eyes for a in self.axes for c in COMPONENTS]

    @property
    def label(self) -> str:
        return f"{'+'.join(self.eyes)}:{'+'.join(self.axes)}"


class SignalConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    sample_rate: float = Field(default=72.0, gt=0)
    sg_window_length: int = Field(default=7, ge=1)
    sg_poly_order: int = Field(default=2, ge=0)
    clamp: float = Field(default=1000.0, gt=0)
    window_samples: int = Field(default=360, ge=1)

    @model_validator(mode="after")
    def check_filter(self) -> Self:
        if self.sg_window_length % 2 == 0:
            raise ValueError("sg_window_length must be odd")
        if self.sg_poly_order >= self.sg_window_length:
            raise ValueError("sg_poly_order must be less than sg_window_length")
        return self

    @property
    def window_seconds(self) -> float:
        return self.window_samples / self.sample_rate


# ---------- Network ----------
class NetworkConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    input_channels: int = Field(default=8, ge=1)
    time_steps: int = Field(default=360, ge=1)
    num_conv_layers: int = Field(default=8, ge=1)
    growth: int = Field(default=32, ge=1)
    kernel_size: int = Field(default=3, ge=1)
    dilations: List[int] = Field(default_factory=lambda: [1, 2, 4, 8, 16, 32, 64, 1])
    embedding_dim: int = Field(default=128, ge=1)
    bn_epsilon: float = Field(default=1e-5, gt=0)
    bn_momentum: float = Field(default=0.1, gt=0, le=1)

    @model_validator(mode="after")
    def check_shape(self) -> Self:
        if len(self.dilations) != self.num_conv_layers:
            raise ValueError(
                f"dilations has {len(self.dilations)} entries, expected num_conv_layers={self.num_conv_layers}"
            )
        if any(d <= 0 for d in self.dilations):
            raise ValueError("dilations must be strictly positive")
        if self.kernel_size % 2 == 0:
            # zero padding preserves length T only for odd kernels
            raise ValueError("kernel_size must be odd")
        return self

    def layer_in_channels(self, i: int) -> int:
        """Input channels of 0-based conv layer i: C + g*i."""
        return self.input_channels + self.growth * i

    @property
    def pooled_channels(self) -> int:
        return self.input_channels + self.growth * self.num_conv_layers


# ---------- Training ----------
class MsLossConfig(BaseModel):
    alpha: float = Field(default=2.0, gt=0)
    beta: float = Field(default=50.0, gt=0)
    lam: float = Field(default=0.5, ge=0, le=1, alias="lambda")
    epsilon: float = Field(default=0.1, ge=0)

    model_config = ConfigDict(frozen=True, populate_by_name=True)


class MinibatchSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    users_per_batch: int = Field(default=16, ge=2)
    samples_per_user: int = Field(default=16, ge=2)

    @property
    def size(self) -> int:
        return self.users_per_batch * self.samples_per_user


class AdamConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)


class LrSchedule(BaseModel):
    model_config = ConfigDict(frozen=True)

    start: float = Field(default=1e-4, gt=0)
    peak: float = Field(default=1e-2, gt=0)
    end: float = Field(default=1e-7, gt=0)
    warmup_fraction: float = Field(default=0.3, gt=0, lt=1)


class TrainPlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    epochs: int = Field(default=100, ge=0)
    stop_after_epochs: Optional[int] = Field(default=None, ge=0)
    adam: AdamConfig = Field(default_factory=AdamConfig)
    schedule: LrSchedule = Field(default_factory=LrSchedule)
    seed: int = 0
    ensemble_folds: Literal[1, 4] = 1


# ---------- Synthetic data ----------
class TaskSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: TaskKind
    duration: float = Field(default=30.0, ge=5)
    sample_rate: float = Field(default=72.0, gt=0)
    # random saccade
    target_range: float = Field(default=15.0, gt=0, le=20)
    jump_interval: float = Field(default=1.0, gt=0)
    jump_jitter: float = Field(default=0.2, ge=0)
    # smooth pursuit
    pursuit_frequency: float = Field(default=0.25, gt=0)
    pursuit_amplitude: float = Field(default=10.0, gt=0, le=20)
    catchup_threshold: float = Field(default=2.0, gt=0)

    @model_validator(mode="after")
    def check_jumps(self) -> Self:
        if self.jump_jitter >= self.jump_interval:
            raise ValueError("jump_jitter must be smaller than jump_interval")
        return self


class SynthPopulation(BaseModel):
    """Population distributions every UserSignature is drawn from."""
    model_config = ConfigDict(frozen=True)

    kappa_mean: Tuple[float, float] = (5.0, 1.5)
    kappa_sd: float = Field(default=1.5, ge=0)
    kappa_max: float = Field(default=10.0, gt=0, le=10)
    gain_sd: float = Field(default=0.05, ge=0)
    vmax_mean: float = Field(default=500.0, gt=0)
    vmax_sd: float = Field(default=60.0, ge=0)
    ms_constant_mean: float = Field(default=12.0, gt=0)
    ms_constant_sd: float = Field(default=2.0, ge=0)
    duration_intercept: float = Field(default=0.022, gt=0)
    duration_slope_mean: float = Field(default=0.0025, gt=0)
    duration_slope_sd: float = Field(default=0.0004, ge=0)
    latency_mean: float = Field(default=0.2, gt=0)
    latency_sd: float = Field(default=0.02, ge=0)
    pursuit_gain_range: Tuple[float, float] = (0.75, 0.98)
    noise_amplitude_range: Tuple[float, float] = (0.02, 0.15)
    noise_exponent_range: Tuple[float, float] = (0.5, 2.0)
    accuracy_bias_median: float = Field(default=1.0, gt=0)
    accuracy_bias_spread: float = Field(default=0.5, ge=0)

    @model_validator(mode="after")
    def check_ranges(self) -> Self:
        lo, hi = self.pursuit_gain_range
        if not (0.5 < lo <= hi <= 1.0):
            raise ValueError("pursuit_gain_range must lie in (0.5, 1]")
        if self.noise_amplitude_range[0] < 0 or self.noise_amplitude_range[0] > self.noise_amplitude_range[1]:
            raise ValueError("noise_amplitude_range must be a nonnegative interval")
        return self


class TierScheme(BaseModel):
    """Quantile partition of users by spatial accuracy, lowest error first."""
    model_config = ConfigDict(frozen=True)

    names: List[str] = Field(default_factory=lambda: ["low", "mid", "high"])
    weights: List[float] = Field(default_factory=lambda: [1.0, 1.0, 1.0])

    @model_validator(mode="after")
    def check_tiers(self) -> Self:
        if len(self.names) != len(self.weights) or not self.names:
            raise ValueError("names and weights must be nonempty and of equal length")
        if len(set(self.names)) != len(self.names):
            raise ValueError("tier names must be unique")
        if any(w <= 0 for w in self.weights):
            raise ValueError("tier weights must be positive")
        return self

    @classmethod
    def accuracy_groups(cls) -> "TierScheme":
        """Five-way train/test layout: two large train tiers bracketing three small test tiers."""
        return cls(
            names=["train_low", "test_low", "test_mid", "test_high", "train_high"],
            weights=[3940.0, 245.0, 245.0, 245.0, 3940.0],
        )


class SynthDatasetSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_users: int = Field(default=40, ge=2)
    random_saccade_recordings: int = Field(default=2, ge=0)
    smooth_pursuit_recordings: int = Field(default=2, ge=0)
    random_saccade: TaskSpec = Field(default_factory=lambda: TaskSpec(kind="random_saccade"))
    smooth_pursuit: TaskSpec = Field(default_factory=lambda: TaskSpec(kind="smooth_pursuit"))
    train_fraction: float = Field(default=0.5, ge=0, le=1)
    test_fraction: float = Field(default=0.5, ge=0, le=1)
    tiers: TierScheme = Field(default_factory=TierScheme)
    population: SynthPopulation = Field(default_factory=SynthPopulation)
    master_seed: int = 0

    @model_validator(mode="after")
    def check_fractions(self) -> Self:
        if abs(self.train_fraction + self.test_fraction - 1.0) > 1e-9:
            raise ValueError("train_fraction and test_fraction must sum to 1")
        if self.random_saccade.kind != "random_saccade" or self.smooth_pursuit.kind != "smooth_pursuit":
            raise ValueError("task specs must match their slot")
        if self.random_saccade.sample_rate != self.smooth_pursuit.sample_rate:
            raise ValueError("both tasks must share one sample rate")
        return self


# ---------- Dataset manifest ----------
class RecordingEntry(BaseModel):
    path: str
    task: TaskKind
    repetition: int = Field(ge=1)

    @property
    def recording_id(self) -> str:
        return f"{self.task}_{self.repetition}"


class UserEntry(BaseModel):
    user_id: str
    recordings: List[RecordingEntry] = Field(default_factory=list)
    accuracy_error_deg: Optional[float] = None
    split: Split = "train"
    tier: Optional[str] = None

    def recording(self, task: TaskKind, repetition: int) -> Optional[RecordingEntry]:
        for r in self.recordings:
            if r.task == task and r.repetition == repetition:
                return r
        return None


class DatasetManifest(BaseModel):
    format: Literal["gazeauth-manifest/1"] = "gazeauth-manifest/1"
    sample_rate: float = 72.0
    users: List[UserEntry] = Field(default_factory=list)
    generator: Optional[Dict[str, Any]] = None

    @model_validator(mode="after")
    def check_unique(self) -> Self:
        ids = [u.user_id for u in self.users]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate user_id in manifest")
        return self

    def split(self, split: Split) -> List[UserEntry]:
        return [u for u in self.users if u.split == split]


# ---------- Experiments ----------
class TaskSelection(BaseModel):
    model_config = ConfigDict(frozen=True)

    task: TaskKind = "random_saccade"
    repetition: int = Field(default=1, ge=1)


class ExperimentConfig(BaseModel):
    experiment_id: str = "experiment"
    manifest: str = "data/manifest.json"
    model_path: Optional[str] = None

    channels: ChannelSpec = Field(default_factory=ChannelSpec)
    signal: SignalConfig = Field(default_factory=SignalConfig)
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    minibatch: MinibatchSpec = Field(default_factory=MinibatchSpec)
    loss: MsLossConfig = Field(default_factory=MsLossConfig)
    plan: TrainPlan = Field(default_factory=TrainPlan)

    train_tasks: List[TaskKind] = Field(default_factory=lambda: ["random_saccade"])
    train_size: Optional[int] = Field(default=None, ge=1)
    train_tiers: Optional[List[str]] = None
    test_tiers: Optional[List[str]] = None
    tier_scheme: TierScheme = Field(default_factory=TierScheme.accuracy_groups)

    enroll: TaskSelection = Field(default_factory=lambda: TaskSelection(repetition=1))
    verify: TaskSelection = Field(default_factory=lambda: TaskSelection(repetition=2))
    enroll_chunks: int = Field(default=4, ge=1)
    verify_chunks: int = Field(default=4, ge=1)

    far_targets: List[float] = Field(default_factory=lambda: [0.00002, 0.0001])
    gallery_sizes: List[int] = Field(default_factory=list)
    gallery_samples: int = Field(default=100, ge=1)
    curve_families: List[Literal["sqrt", "power", "log", "linear"]] = Field(default_factory=lambda: ["sqrt"])
    linear_tail: Optional[int] = Field(default=None, ge=3)
    export_scores: bool = False
    permanence: bool = False
    icc_form: Literal["consistency", "agreement"] = "consistency"
    normality_references: int = Field(default=10000, ge=10)

    seed: int = 0
    threads: int = Field(default=1, ge=1)

    @model_validator(mode="before")
    @classmethod
    def fill_input_channels(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        channels = data.get("channels", ChannelSpec())
        if not isinstance(channels, ChannelSpec):
            channels = ChannelSpec.model_validate(channels)
        network = data.get("network", {})
        if isinstance(network, NetworkConfig):
            network = network.model_dump()
        network = dict(network)
        given = network.get("input_channels")
        if given is not None and given != channels.channel_count:
            raise ValueError(
                f"network.input_channels={given} does not match channel spec {channels.label} "
                f"({channels.channel_count} channels)"
            )
        network["input_channels"] = channels.channel_count
        return {**data, "network": network}

    @model_validator(mode="after")
    def check_selection(self) -> Self:
        if self.enroll == self.verify:
            raise ValueError("enrollment and verification must use distinct recordings")
        if any(not (0.0 < t <= 1.0) for t in self.far_targets):
            raise ValueError("far_targets must lie in (0, 1]")
        if sorted(set(self.gallery_sizes)) != list(self.gallery_sizes):
            raise ValueError("gallery_sizes must be strictly increasing")
        if self.network.time_steps != self.signal.window_samples:
            raise ValueError("network.time_steps must equal signal.window_samples")
        return self

    @property
    def seconds(self) -> Tuple[float, float]:
        w = self.signal.window_seconds
        return self.enroll_chunks * w, self.verify_chunks * w
