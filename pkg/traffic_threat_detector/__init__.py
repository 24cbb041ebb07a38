from .config import PipelineConfig, load_pipeline_config
from .errors import DetectorError
from .ingest import FeatureTable, load_csv, split_train_eval
from .model import ClassifierModel, ModelConfig, build, load_checkpoint, save_checkpoint
from .ppfle import DataList, HashConfig, encode_table
from .schema import FeatureSchema, default_schema
from .tokenizer import TokenizerModel, encode_lines, load_tokenizer, train_bbpe
from .training import TrainConfig, Trainer, predict

__all__ = [
    "ClassifierModel",
    "DataList",
    "DetectorError",
    "FeatureSchema",
    "FeatureTable",
    "HashConfig",
    "ModelConfig",
    "PipelineConfig",
    "TokenizerModel",
    "TrainConfig",
    "Trainer",
    "build",
    "default_schema",
    "encode_lines",
    "encode_table",
    "load_checkpoint",
    "load_csv",
    "load_pipeline_config",
    "load_tokenizer",
    "predict",
    "save_checkpoint",
    "split_train_eval",
    "train_bbpe",
]
