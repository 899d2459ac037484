# Import classes and functions individually to avoid circular imports
from .config import config, dict_to_namespace, load_json_file
from .output_formatter import OutputFormatter, formatter
from .file_utils import save_to_json, save_to_csv, load_csv

# Define what should be imported with 'from src.utils import *'
__all__ = [
    # Config
    'config',
    'dict_to_namespace',
    'load_json_file',

    # Output Formatter
    'OutputFormatter',
    'formatter',

    # File Utils
    'save_to_json',
    'save_to_csv',
    'load_csv',
]
