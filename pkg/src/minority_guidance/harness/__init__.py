from .config import ConfigError, DEFAULTS, dump_config, load_config, parse_config, save_config, validate
from .io import (CheckpointError, CheckpointVersionError, FingerprintError, emit_csv, load_checkpoint,
                 read_csv, read_matrix, save_checkpoint)
from .pipeline import STAGES, StageError, run_pipeline, run_stages, synth_dataset
