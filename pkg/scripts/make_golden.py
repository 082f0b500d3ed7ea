"""Regenerate tests/golden/*.bin from the seeded corpus."""

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from corpus import build_corpus  # noqa: E402

from tbids import codec  # noqa: E402


def main() -> None:
    out = ROOT / "tests" / "golden"
    out.mkdir(exist_ok=True)
    for name, obj in build_corpus().items():
        data = codec.encode(obj)
        (out / f"{name}.bin").write_bytes(data)
        print(f"{name}: {len(data)} bytes")


if __name__ == "__main__":
    main()
