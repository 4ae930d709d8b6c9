"""
Builds the HTML API reference of the solver library into docs/_build.
The library modules are staged flat so autoapi documents `mesh.x`
rather than `api.mesh.x`; private modules stay out of the reference.
"""
import pathlib
import shutil
import subprocess


FOLDER = pathlib.Path(__file__).parent
BUILD_FOLDER = FOLDER / "_build"
STAGING_FOLDER = FOLDER / "_temp"
API_FOLDER = FOLDER.parent / "src" / "api"


def stage_modules() -> list[pathlib.Path]:
    """Copies the public library modules into the staging folder."""
    if STAGING_FOLDER.is_dir():
        shutil.rmtree(STAGING_FOLDER)
    STAGING_FOLDER.mkdir()
    staged = []
    for path in sorted(API_FOLDER.glob("*.py")):
        if path.stem.startswith("_"):
            continue
        staged.append(
            pathlib.Path(shutil.copy(path, STAGING_FOLDER / path.name)))
    return staged


def build() -> None:
    stage_modules()
    try:
        subprocess.run(
            ("sphinx-build", "-b", "html", str(FOLDER), str(BUILD_FOLDER)),
            check=True)
    finally:
        shutil.rmtree(STAGING_FOLDER)


# Sphinx imports this module from conf.py, so staging happens on import
# as well as when the script is run.
if __name__ == "__main__":
    build()
else:
    stage_modules()
