"""
Sphinx configuration of the surface_phasefield API reference.
Build with `python docs/build.py`, which stages the library modules
first; running sphinx-build directly finds nothing to document.
"""
import json
import pathlib


DOCS_FOLDER = pathlib.Path(__file__).parent
# Public names per module; everything else is left out of the reference.
INCLUDE_FILE = DOCS_FOLDER / "include.json"
INCLUDE = json.loads(INCLUDE_FILE.read_text(encoding="utf8"))

project = "Surface Phase-Field"
author = "Leo Zhang"
copyright = f"2024, {author}"
release = "1.0.0"

exclude_patterns = ["_build", "_temp"]
html_theme = "alabaster"

extensions = ["autoapi.extension"]
autoapi_dirs = ["_temp"]
autoapi_member_order = "groupwise"
autoapi_options = ["members", "show-module-summary"]


def skip_unless_included(app, what, name, obj, skip, options) -> bool:
    """Skips any module member not listed in include.json."""
    current = INCLUDE
    for part in name.split("."):
        if part not in current:
            return True
        current = current[part] if isinstance(current, dict) else []
    return False


def setup(sphinx) -> None:
    import build
    sphinx.connect("autoapi-skip-member", skip_unless_included)
