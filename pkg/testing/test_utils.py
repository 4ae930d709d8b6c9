"""Unit Tests the _utils.py module."""
import unittest

import numpy as np

import __init__
from _utils import _split_range, _in_box


class Test_utils(unittest.TestCase):

    def test_split_range(self) -> None:
        self.assertEqual(
            _split_range(5, 2), [slice(0, 2), slice(2, 4), slice(4, 5)])
        self.assertEqual(_split_range(3, 4), [slice(0, 3)])
        self.assertEqual(_split_range(0, 3), [])
        self.assertRaises(ValueError, _split_range, 3, 0)

    def test_in_box(self) -> None:
        lower, upper = np.array([0, 0]), np.array([5, 5])
        self.assertTrue(_in_box(lower, upper, np.array([3, 4]))[0])
        self.assertTrue(_in_box(lower, upper, np.array([0, 5]))[0])
        self.assertFalse(_in_box(lower, upper, np.array([6, 1]))[0])
        inside = _in_box(
            np.array([-1, -1, -1]), np.array([1, 1, 1]),
            np.array([[0, 0, 0], [1, 1, 1], [0, 2, 0], [-1, 0, -1.5]]))
        self.assertEqual(inside.tolist(), [True, True, False, False])


if __name__ == "__main__":
    unittest.main()
