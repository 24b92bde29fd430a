from pathlib import Path

DEFAULT_RUN_CONFIG = Path(__file__).with_name("default_run.yaml")
