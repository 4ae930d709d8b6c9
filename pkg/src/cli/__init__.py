import pathlib
import sys


API_FOLDER = pathlib.Path(__file__).parent.parent / "api"
if str(API_FOLDER) not in sys.path:
    sys.path.append(str(API_FOLDER))
