import pathlib
import sys


SRC_FOLDER = pathlib.Path(__file__).parent.parent / "src"
sys.path.append(str(SRC_FOLDER / "api"))
sys.path.append(str(SRC_FOLDER / "cli"))


TEST_OUTPUT_FOLDER = pathlib.Path(__file__).parent / "test_outputs"
TEST_OUTPUT_FOLDER.mkdir(exist_ok=True)
