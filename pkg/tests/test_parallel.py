from __future__ import annotations

import threading
import unittest

from ramseyforms.core.parallel import ordered_map


class TestOrderedMap(unittest.TestCase):
    """Results come back in input order at any worker count."""

    def test_order_is_kept(self) -> None:
        """Results come back in input order."""
        items = list(range(50))
        for workers in (1, 2, 8):
            with self.subTest(workers=workers):
                self.assertEqual(ordered_map(lambda x: x * x, items, workers), [x * x for x in items])

    def test_inline_when_single(self) -> None:
        """One worker runs on the calling thread."""
        seen: list[str] = []
        ordered_map(lambda _: seen.append(threading.current_thread().name), [0, 1, 2], workers=1)
        self.assertEqual(set(seen), {threading.current_thread().name})
        self.assertEqual(ordered_map(lambda x: x, [], workers=4), [])

    def test_errors_propagate(self) -> None:
        """Worker exceptions reach the caller."""
        def _boom(x: int) -> int:
            if x == 3:
                raise ValueError("three")
            return x

        with self.assertRaisesRegex(ValueError, "three"):
            ordered_map(_boom, range(6), workers=3)


if __name__ == "__main__":
    unittest.main()
