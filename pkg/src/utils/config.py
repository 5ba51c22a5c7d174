"""
Configuration Module
Manages store, pipeline, service and benchmark settings.
"""

import copy
import json
import logging
import os
from typing import Any, Dict

import yaml
from dotenv import load_dotenv


DB_ENV_VAR = "PROVD4M_DB"

logger = logging.getLogger("provd4m.config")


class Config:
    """Configuration manager for the provenance store."""

    # Default configuration
    DEFAULT_CONFIG = {
        'store': {
            'path': '',
            'applied_history': 4096
        },
        'pipeline': {
            'batch_size': 1024,
            'spool_dir': 'spool',
            'report_interval': 100000,
            'queue_depth': 8,
            'keep_spool': True,
            'strict': True
        },
        'generator': {
            'max_edges': 4,
            'seed': 0,
            'kind_weights': [6, 3, 1]
        },
        'service': {
            'listen': '127.0.0.1:7070',
            'queue_size': 10000,
            'max_consecutive_naks': 100
        },
        'query': {
            'depth': 3,
            'format': 'listing'
        },
        'bench': {
            'sizes': [2, 16, 256, 4096, 65536],
            'repetitions': 3,
            'depth_limit': 32,
            'batch_size': 1024
        },
        'logging': {
            'enabled': True,
            'level': 'INFO',
            'log_file': None
        }
    }

    def __init__(self, config_file: str = None, use_env: bool = True):
        """
        Initialize configuration.

        Args:
            config_file: Path to configuration file (YAML or JSON)
            use_env: Read ``.env`` and PROVD4M_DB for the default store path
        """
        self.config = copy.deepcopy(self.DEFAULT_CONFIG)

        if config_file:
            self.load_from_file(config_file)

        if use_env:
            load_dotenv()
            db_path = os.environ.get(DB_ENV_VAR)
            if db_path and not self.get('store.path'):
                self.set('store.path', db_path)

    def load_from_file(self, filepath: str):
        """Load configuration from file."""
        if not (filepath.endswith(('.yaml', '.yml', '.json'))):
            raise ValueError(f"Unsupported config file format: {filepath}")
        try:
            with open(filepath, 'r') as f:
                if filepath.endswith('.json'):
                    user_config = json.load(f)
                else:
                    user_config = yaml.safe_load(f) or {}
        except (OSError, ValueError, yaml.YAMLError) as e:
            logger.error(f"Error loading config file {filepath}: {e}")
            raise

        self._update_nested_dict(self.config, user_config)

    def _update_nested_dict(self, base: Dict, update: Dict):
        """Recursively update nested dictionary."""
        for key, value in update.items():
            if key in base and isinstance(base[key], dict) and isinstance(value, dict):
                self._update_nested_dict(base[key], value)
            else:
                base[key] = value

    def save_to_file(self, filepath: str):
        """Save configuration to file."""
        with open(filepath, 'w') as f:
            if filepath.endswith('.yaml') or filepath.endswith('.yml'):
                yaml.safe_dump(self.config, f, default_flow_style=False)
            elif filepath.endswith('.json'):
                json.dump(self.config, f, indent=2)
            else:
                raise ValueError(f"Unsupported config file format: {filepath}")

    def get(self, key_path: str, default: Any = None) -> Any:
        """
        Get configuration value using dot notation.

        Args:
            key_path: Path to config value (e.g., 'pipeline.batch_size')
            default: Default value if key not found

        Returns:
            Configuration value
        """
        value = self.config
        for key in key_path.split('.'):
            if isinstance(value, dict) and key in value:
                value = value[key]
            else:
                return default
        return value

    def set(self, key_path: str, value: Any):
        """Set configuration value using dot notation."""
        keys = key_path.split('.')
        config = self.config
        for key in keys[:-1]:
            config = config.setdefault(key, {})
        config[keys[-1]] = value

    def get_section(self, section: str) -> Dict:
        """Get entire configuration section."""
        return self.config.get(section, {})

    def __getitem__(self, key: str) -> Any:
        return self.config[key]
