"""
Reading study configurations from flat key = value files.

One key per line; blank lines and text after # are ignored:

    # Circle study, q = 6
    example = circle
    q = 6
    levels = 5
    csv = example1_q6.csv

Valid keys: example, q, gamma, levels, h0, element_order, cg_tol, csv,
vtk, L, workers. Missing keys take the defaults of the chosen example.
"""
import pathlib

from console import CONFIG_FOLDER
from analysis import StudyConfig, validate_study_config


CONFIG_SUFFIX = ".cfg"
# Config key -> (StudyConfig field, converter).
CONFIG_KEYS = {
    "example": ("example", str),
    "q": ("q", int),
    "gamma": ("gamma", float),
    "levels": ("levels", int),
    "h0": ("h0", float),
    "element_order": ("element_order", int),
    "cg_tol": ("cg_tol", float),
    "csv": ("csv_path", str),
    "vtk": ("vtk_path", str),
    "L": ("surface_points", int),
    "workers": ("workers", int),
}
# Custom level sets need callables and are only available from Python.
FILE_EXAMPLES = ("circle", "sphere", "pretzel")


def parse_config_text(text: str) -> StudyConfig:
    """Parses and validates the contents of a configuration file."""
    values = {}
    for number, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"Line {number}: expected 'key = value'.")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ValueError(
                f"Line {number}: unknown key {key!r}. "
                f"Valid keys: {', '.join(CONFIG_KEYS)}.")
        if key in values:
            raise ValueError(f"Line {number}: duplicate key {key!r}.")
        if not value:
            raise ValueError(f"Line {number}: missing value for {key!r}.")
        field_name, converter = CONFIG_KEYS[key]
        try:
            values[field_name] = converter(value)
        except ValueError:
            raise ValueError(
                f"Line {number}: invalid value {value!r} for {key!r}.")
    if "example" not in values:
        raise ValueError("The 'example' key is required.")
    if values["example"] not in FILE_EXAMPLES:
        raise ValueError(
            f"Example must be one of {', '.join(FILE_EXAMPLES)} "
            "in a configuration file.")
    config = StudyConfig(**values)
    validate_study_config(config)
    return config


def resolve_config_path(name: str | pathlib.Path) -> pathlib.Path:
    """
    Returns an existing config path: `name` itself, or the bundled
    config of that name.
    """
    path = pathlib.Path(name)
    if path.is_file():
        return path
    bundled = CONFIG_FOLDER / f"{path.stem}{CONFIG_SUFFIX}"
    if path.parent == pathlib.Path(".") and bundled.is_file():
        return bundled
    raise FileNotFoundError(f"No configuration file {str(name)!r}.")


def load_config(name: str | pathlib.Path) -> StudyConfig:
    """Loads a config file by path or bundled name."""
    path = resolve_config_path(name)
    return parse_config_text(path.read_text(encoding="utf8"))


def bundled_configs() -> dict[str, str]:
    """Maps each bundled config name to its first comment line."""
    configs = {}
    for path in sorted(CONFIG_FOLDER.glob(f"*{CONFIG_SUFFIX}")):
        description = ""
        for line in path.read_text(encoding="utf8").splitlines():
            if line.startswith("#"):
                description = line.lstrip("# ").strip()
                break
        configs[path.stem] = description
    return configs
