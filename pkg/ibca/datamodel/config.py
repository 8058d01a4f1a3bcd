"""
Configuration records shared by the model, the objective and the CLI.

The dataclasses double as marshmallow-dataclass schemas (see serializers.py);
field metadata carries the per-field validators so that YAML loading reports
field-level messages, while __post_init__ checks cross-field invariants.
"""
from dataclasses import dataclass, field
from typing import List, Optional

from marshmallow import validate

from ibca.error_handlers import ConfigurationException

VARIANTS = ['basic', 'single_vib', 'gmm_vib', 'full']
PRESETS = ['desk', 'paper']


def _positive(**kwargs):
    return field(metadata={'validate': validate.Range(min=1)}, **kwargs)


def _non_negative(**kwargs):
    return field(metadata={'validate': validate.Range(min=0)}, **kwargs)


@dataclass
class ModelConfig:
    image_size: int = _positive(default=32)
    patch_size: int = _positive(default=8)
    in_channels: int = _positive(default=3)
    n_classes: int = _positive(default=4)
    embed_dim: int = _positive(default=64)
    n_heads: int = _positive(default=4)
    n_blocks: int = _positive(default=4)
    mlp_ratio: float = field(default=4.0, metadata={'validate': validate.Range(min=0, min_inclusive=False)})
    seed: int = 0

    def __post_init__(self):
        if self.image_size % self.patch_size != 0:
            raise ConfigurationException(
                'image_size {} is not divisible by patch_size {}'.format(self.image_size, self.patch_size))
        if self.embed_dim % self.n_heads != 0:
            raise ConfigurationException(
                'embed_dim {} is not divisible by n_heads {}'.format(self.embed_dim, self.n_heads))

    @property
    def grid_size(self):
        """N_p, patches per side"""
        return self.image_size // self.patch_size

    @property
    def n_patches(self):
        return self.grid_size ** 2

    @property
    def n_tokens(self):
        return self.n_classes + self.n_patches


@dataclass
class TrainConfig:
    variant: str = field(default='full', metadata={'validate': validate.OneOf(VARIANTS)})
    beta: float = _non_negative(default=0.001)
    lambda_s: float = _non_negative(default=0.01)
    learning_rate: float = field(default=1e-4, metadata={'validate': validate.Range(min=0, min_inclusive=False)})
    batch_size: int = _positive(default=32)
    epochs: int = _non_negative(default=30)
    alpha0: float = field(default=10.0, metadata={'validate': validate.Range(min=0, min_inclusive=False)})
    seed: int = 0
    threshold: float = field(default=0.5, metadata={
        'validate': validate.Range(min=0, max=1, min_inclusive=False, max_inclusive=False)})
    cosine_decay: bool = False
    textbook_kl: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationException(
                'variant: Must be one of: {}.'.format(', '.join(VARIANTS)))
        if self.beta < 0 or self.lambda_s < 0:
            raise ConfigurationException('beta and lambda_s must be non-negative')
        if self.learning_rate <= 0:
            raise ConfigurationException('learning_rate must be positive')
        if not 0 < self.threshold < 1:
            raise ConfigurationException('threshold must lie in (0, 1)')


@dataclass
class DataConfig:
    manifest: Optional[str] = None
    train_manifest: Optional[str] = None
    val_manifest: Optional[str] = None
    test_manifest: Optional[str] = None
    image_root: Optional[str] = None
    split_ratios: List[float] = field(default_factory=lambda: [0.8, 0.1, 0.1])
    split_seed: int = 0
    channel_mean: List[float] = field(default_factory=lambda: [0.5, 0.5, 0.5])
    channel_std: List[float] = field(default_factory=lambda: [0.25, 0.25, 0.25])
    num_workers: int = _non_negative(default=0)
    cache_size: int = _non_negative(default=0)

    def __post_init__(self):
        if len(self.channel_mean) != len(self.channel_std):
            raise ConfigurationException('channel_mean and channel_std differ in length')
        if any(s <= 0 for s in self.channel_std):
            raise ConfigurationException('channel_std entries must be positive')


@dataclass
class OutputConfig:
    root: str = 'runs'
    run_name: Optional[str] = None


@dataclass
class RunConfig:
    preset: str = field(default='desk', metadata={'validate': validate.OneOf(PRESETS)})
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def run_name(self):
        if self.output.run_name:
            return self.output.run_name
        return '{}-seed{}'.format(self.train.variant, self.train.seed)


@dataclass
class SyntheticSpec:
    n_classes: int = _positive(default=4)
    image_size: int = _positive(default=32)
    n_samples: int = _positive(default=2000)
    rho_train: float = field(default=0.9, metadata={'validate': validate.Range(min=0, max=1)})
    rho_test: float = field(default=0.0, metadata={'validate': validate.Range(min=0, max=1)})
    label_rate: float = field(default=0.35, metadata={'validate': validate.Range(min=0, max=1)})
    cooccurrence: float = field(default=0.2, metadata={'validate': validate.Range(min=0, max=1)})
    noise: float = _non_negative(default=0.05)
    pattern_radius: int = _positive(default=4)
    split_ratios: List[float] = field(default_factory=lambda: [0.8, 0.1, 0.1])
    seed: int = 0

    def __post_init__(self):
        for name in ('rho_train', 'rho_test', 'label_rate', 'cooccurrence'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationException('{} must lie in [0, 1], got {}'.format(name, value))
        if self.n_samples <= 0:
            raise ConfigurationException('n_samples must be positive')
        if self.noise < 0:
            raise ConfigurationException('noise must be non-negative')
