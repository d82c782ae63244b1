"""File-based workspace: every pipeline stage communicates through files.

Layout under the workspace root:

    config.json            gateway, split, training, and item settings
    corpora/<item>.json    canonical corpus (item + responses with splits)
    components/<item>.json component store
    features/<item>.json   feature matrix (labels; one-hot recomputed)
    draws/<item>.jsonl     labeling draws (audit + distillation source)
    models/<item>.json     trained ordinal model
    reports/<item>.json    evaluation reports
    overrides/<item>.jsonl append-only override log
    exports/               distillation exports
    cache/                 completion cache (one JSON record per request)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .dataset import Dataset, Item, item_from_dict, item_to_dict, load_corpus
from .extraction import ComponentSet, load_component_set
from .explain import OverrideLog
from .featurize import FeatureMatrix, load_feature_matrix
from .gateway import ChatGateway, HttpBackend, MockBackend, RetryPolicy
from .ioutil import read_json, write_json
from .mockmodel import make_mock_handler
from .ordinal import OrdinalModel, TrainConfig, load_model


@dataclass
class GatewaySettings:
    backend: str = "mock"
    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"
    extractor_model: str = "gpt-4.1"
    featurizer_model: str = "gpt-4.1-mini"
    temperature: float = 0.7
    max_tokens: int = 1024
    max_in_flight: int = 4
    rpm_limit: int | None = None
    retry_attempts: int = 5
    retry_base_delay: float = 1.0
    mock_noise: float = 0.0
    keep_raw_draws: bool = True

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "GatewaySettings":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class WorkspaceConfig:
    gateway: GatewaySettings = field(default_factory=GatewaySettings)
    split_ratio: float = 0.8
    split_seed: int = 13
    train: TrainConfig = field(default_factory=TrainConfig)
    items: dict[str, Item] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "gateway": self.gateway.to_dict(),
            "split": {"ratio": self.split_ratio, "seed": self.split_seed},
            "train": {
                "lambda_grid": list(self.train.lambda_grid),
                "max_iterations": self.train.max_iterations,
                "gradient_tolerance": self.train.gradient_tolerance,
                "seed": self.train.seed,
            },
            "items": {
                item_id: {k: v for k, v in item_to_dict(item).items() if k != "id"}
                for item_id, item in self.items.items()
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorkspaceConfig":
        train_raw = d.get("train", {})
        return cls(
            gateway=GatewaySettings.from_dict(d.get("gateway", {})),
            split_ratio=float(d.get("split", {}).get("ratio", 0.8)),
            split_seed=int(d.get("split", {}).get("seed", 13)),
            train=TrainConfig(
                lambda_grid=tuple(train_raw.get("lambda_grid", (0.0, 0.001, 0.01, 0.1, 1.0))),
                max_iterations=int(train_raw.get("max_iterations", 5000)),
                gradient_tolerance=float(train_raw.get("gradient_tolerance", 1e-6)),
                seed=int(train_raw.get("seed", 0)),
            ),
            items={
                item_id: item_from_dict({"id": item_id, **cfg})
                for item_id, cfg in d.get("items", {}).items()
            },
        )


class Workspace:
    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    # -- layout ------------------------------------------------------------

    @property
    def config_path(self) -> Path:
        return self.root / "config.json"

    def dir(self, name: str) -> Path:
        return self.root / name

    def corpus_path(self, item_id: str) -> Path:
        return self.dir("corpora") / f"{item_id}.json"

    def components_path(self, item_id: str) -> Path:
        return self.dir("components") / f"{item_id}.json"

    def features_path(self, item_id: str) -> Path:
        return self.dir("features") / f"{item_id}.json"

    def draws_path(self, item_id: str) -> Path:
        return self.dir("draws") / f"{item_id}.jsonl"

    def model_path(self, item_id: str) -> Path:
        return self.dir("models") / f"{item_id}.json"

    def report_path(self, item_id: str) -> Path:
        return self.dir("reports") / f"{item_id}.json"

    def overrides_path(self, item_id: str) -> Path:
        return self.dir("overrides") / f"{item_id}.jsonl"

    # -- config ------------------------------------------------------------

    def load_config(self) -> WorkspaceConfig:
        if self.config_path.exists():
            return WorkspaceConfig.from_dict(read_json(self.config_path))
        return WorkspaceConfig()

    def save_config(self, config: WorkspaceConfig) -> None:
        write_json(self.config_path, config.to_dict())

    # -- artifacts ----------------------------------------------------------

    def item_ids_with_corpus(self) -> list[str]:
        d = self.dir("corpora")
        if not d.exists():
            return []
        return sorted(p.stem for p in d.glob("*.json"))

    def load_dataset(self, item_id: str) -> Dataset:
        return load_corpus(self.corpus_path(item_id))

    def load_components(self, item_id: str) -> ComponentSet:
        return load_component_set(self.components_path(item_id))

    def load_matrix(self, item_id: str, components: ComponentSet | None = None) -> FeatureMatrix:
        components = components or self.load_components(item_id)
        return load_feature_matrix(self.features_path(item_id), components)

    def load_model(self, item_id: str) -> OrdinalModel:
        return load_model(self.model_path(item_id))

    def override_log(self, item_id: str) -> OverrideLog:
        return OverrideLog(self.overrides_path(item_id))

    # -- gateway -----------------------------------------------------------

    def build_gateway(
        self, settings: GatewaySettings, backend_override: str | None = None
    ) -> ChatGateway:
        name = backend_override or settings.backend
        if name == "mock":
            backend = MockBackend(make_mock_handler(noise=settings.mock_noise))
        elif name == "http":
            backend = HttpBackend(
                base_url=settings.base_url,
                api_key_env=settings.api_key_env,
                retry=RetryPolicy(
                    attempts=settings.retry_attempts, base_delay=settings.retry_base_delay
                ),
            )
        else:
            raise ValueError(f"unknown backend {name!r}; use 'mock' or 'http'")
        return ChatGateway(
            backend,
            cache_dir=self.dir("cache"),
            max_in_flight=settings.max_in_flight,
            rpm_limit=settings.rpm_limit,
        )
