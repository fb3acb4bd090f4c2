#!/usr/bin/env python3
"""Download MovieLens 100k into ``data/ml-100k/u.data``.

Tries the GroupLens archive first. When that host is unreachable, falls back
to the copy of the same ratings shipped inside the ``recbole`` wheel on PyPI
(``recbole/dataset_example/ml-100k/ml-100k.inter``), converted back to the
tab-separated ``user item rating timestamp`` layout. The data is not
redistributed with this repository; see the GroupLens terms of use.
"""

from __future__ import annotations

import argparse
import io
import subprocess
import sys
import tempfile
import urllib.request
import zipfile
from pathlib import Path

GROUPLENS_URL = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"
WHEEL_SPEC = "recbole==1.2.1"
INTER_PATH = "recbole/dataset_example/ml-100k/ml-100k.inter"
EXPECTED_ROWS = 100_000


def _get(url: str, timeout: float = 60.0) -> bytes:
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        return resp.read()


def from_grouplens() -> str:
    archive = zipfile.ZipFile(io.BytesIO(_get(GROUPLENS_URL)))
    return archive.read("ml-100k/u.data").decode("latin-1")


def from_pypi_wheel() -> str:
    # pip knows the configured package index (or mirror), so let it fetch the wheel
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "--quiet", "-d", tmp, WHEEL_SPEC],
            check=True,
        )
        wheel = next(Path(tmp).glob("*.whl"))
        text = zipfile.ZipFile(wheel).read(INTER_PATH).decode("utf-8")
    out = []
    for line in text.splitlines()[1:]:  # drop the typed header
        user, item, rating, ts = line.split("\t")
        out.append(f"{user}\t{item}\t{int(float(rating))}\t{int(float(ts))}")
    return "\n".join(out) + "\n"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "ml-100k"))
    args = ap.parse_args(argv)
    target = Path(args.out) / "u.data"
    if target.exists():
        print(f"{target} already present")
        return 0
    text = None
    for source in (from_grouplens, from_pypi_wheel):
        try:
            text = source()
            print(f"fetched via {source.__name__}")
            break
        except Exception as exc:  # network failures of any kind: try the next source
            print(f"{source.__name__} failed: {exc}", file=sys.stderr)
    if text is None:
        print("could not fetch MovieLens 100k", file=sys.stderr)
        return 1
    n = sum(1 for line in text.splitlines() if line.strip())
    if n != EXPECTED_ROWS:
        print(f"warning: expected {EXPECTED_ROWS} rows, got {n}", file=sys.stderr)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text)
    print(f"wrote {n} ratings to {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
