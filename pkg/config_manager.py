"""
Configuration manager module for the engine.
Handles loading, saving, and accessing settings.ini defaults.
"""

import os
import json
import logging
import configparser
import sys

from errors import ConfigError

# Default configuration values (empty strings mean "derive at run time")
DEFAULT_CONFIG = {
    "truncation": {
        "n_hbar": 2,
        "xi_hi": 6,
        "xi_lo": "",  # -xi_hi when empty
        "t_deg": 2,
        "tbar_deg": 0
    },
    "solver": {
        "window_pad": "",  # automatic when empty
        "max_iterations": 64,
        "preset": "c1-string"
    },
    "output": {
        "format": "json",
        "out_dir": "out"
    },
    "logging": {
        "level": "INFO",
        "log_directory": "",  # Will be set during initialization
        "log_file": "todahbar.log"
    }
}


def get_app_directory():
    """
    Get the appropriate directory for storing settings and logs.
    Creates the directory if it doesn't exist.
    """
    try:
        # Use different directories based on platform
        if sys.platform == 'win32':
            app_dir = os.path.join(os.environ['APPDATA'], 'TodaHbar')
        elif sys.platform == 'darwin':  # macOS
            app_dir = os.path.expanduser('~/Library/Application Support/TodaHbar')
        else:  # Linux and other Unix-like systems
            app_dir = os.path.expanduser('~/.config/todahbar')

        if not os.path.exists(app_dir):
            os.makedirs(app_dir)
            logging.debug(f"Created application directory: {app_dir}")

        return app_dir
    except Exception as e:
        logging.warning(f"Error creating application directory: {e}")
        # Fall back to current directory
        return os.getcwd()


def _coerce(value):
    """bool, int, float or the string itself, as the settings file stores text."""
    if value.lower() in ("true", "false"):
        return value.lower() == "true"
    try:
        if "." in value:
            return float(value)
        return int(value)
    except ValueError:
        return value


class ConfigManager:
    """
    Manages engine configuration settings.
    Handles loading, saving, and accessing settings.

    Parameters:
    -----------
    config_file : str, optional
        Settings file; relative paths are resolved in the application
        directory. An explicitly named file must exist.
    app_dir : str, optional
        Override for the application directory
    """

    def __init__(self, config_file=None, app_dir=None):
        self.app_dir = app_dir or get_app_directory()
        explicit = config_file is not None

        if config_file is None:
            self.config_file = os.path.join(self.app_dir, "settings.ini")
        elif os.path.isabs(config_file):
            self.config_file = config_file
        else:
            self.config_file = os.path.join(self.app_dir, config_file)

        logging.debug(f"Using configuration file: {self.config_file}")

        self.config = configparser.ConfigParser()

        if os.path.exists(self.config_file):
            self.load()
        elif explicit:
            raise ConfigError(f"Configuration file not found: {self.config_file}")
        else:
            self._set_defaults()
            self.save()

        if not self.get('logging', 'log_directory'):
            self.set('logging', 'log_directory', os.path.join(self.app_dir, 'logs'))

    def _set_defaults(self):
        """Set default configuration values."""
        for section, options in DEFAULT_CONFIG.items():
            self.config[section] = {}
            for key, value in options.items():
                self.config[section][key] = str(value)

    def load(self):
        """Load configuration from file."""
        try:
            self.config.read(self.config_file)
        except configparser.Error as e:
            raise ConfigError(f"Cannot read configuration {self.config_file}: {e}") from e
        # Add any missing default sections/options
        for section, options in DEFAULT_CONFIG.items():
            if section not in self.config:
                self.config[section] = {}
            for key, value in options.items():
                if key not in self.config[section]:
                    self.config[section][key] = str(value)

    def save(self):
        """Save configuration to file."""
        try:
            config_dir = os.path.dirname(self.config_file)
            if config_dir and not os.path.exists(config_dir):
                os.makedirs(config_dir)
                logging.debug(f"Created configuration directory: {config_dir}")

            with open(self.config_file, 'w') as f:
                self.config.write(f)
            logging.debug(f"Configuration saved to: {self.config_file}")
            return True
        except OSError as e:
            logging.warning(f"Error saving configuration: {e}")
            # Try saving to current directory as fallback
            try:
                fallback_path = os.path.join(os.getcwd(), "settings_fallback.ini")
                with open(fallback_path, 'w') as f:
                    self.config.write(f)
                logging.warning(f"Configuration saved to fallback location: {fallback_path}")
                return True
            except OSError as fallback_e:
                logging.error(f"Failed to save configuration to fallback location: {fallback_e}")
                return False

    def get(self, section, option, fallback=None):
        """Get a configuration value with proper type conversion."""
        if section not in self.config or option not in self.config[section]:
            return fallback
        return _coerce(self.config[section][option])

    def get_int(self, section, option, fallback=None):
        """Integer setting; empty values give ``fallback``."""
        value = self.get(section, option, fallback)
        if value == "" or value is None:
            return fallback
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"[{section}] {option} must be an integer, got {value!r}")
        return value

    def set(self, section, option, value):
        """Set a configuration value."""
        if section not in self.config:
            self.config[section] = {}

        self.config[section][option] = str(value)

    def export_json(self, filepath):
        """Export configuration as JSON."""
        config_dict = {}
        for section in self.config:
            if section == "DEFAULT":
                continue
            config_dict[section] = {key: _coerce(val) for key, val in self.config[section].items()}

        try:
            with open(filepath, 'w') as f:
                json.dump(config_dict, f, indent=4)
            return True
        except OSError as e:
            logging.error(f"Error exporting to JSON: {e}")
            return False

    def import_json(self, filepath):
        """Import configuration from JSON."""
        try:
            with open(filepath, 'r') as f:
                config_dict = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            logging.error(f"Error importing from JSON: {e}")
            return False

        for section, options in config_dict.items():
            if section not in self.config:
                self.config[section] = {}
            for key, val in options.items():
                self.config[section][key] = str(val)

        return self.save()


# Singleton instance
_config_instance = None


def get_config():
    """Get the singleton configuration manager instance."""
    global _config_instance
    if _config_instance is None:
        _config_instance = ConfigManager()
    return _config_instance


def initialize_config(path=None, app_dir=None):
    """Initialize the configuration system, optionally from an explicit settings file."""
    global _config_instance
    if path is not None or app_dir is not None:
        _config_instance = ConfigManager(path, app_dir)
    return get_config()
