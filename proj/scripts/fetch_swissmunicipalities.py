#!/usr/bin/env python3
"""Fetch the Swiss municipalities sampling frame into data/.

The frame (2,896 municipalities with region, land-use areas and population
counts) ships with the R `sampling` package. This script tries, in order:

  1. the Rdatasets CSV mirror,
  2. the CRAN GitHub mirror's .rda file (parsed with pyreadr, installed on
     demand).

Run it on a machine with network access; the acceptance suite picks the file
up from data/swissmunicipalities.csv.
"""

import csv
import io
import subprocess
import sys
import urllib.request
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data" / "swissmunicipalities.csv"
EXPECTED_ROWS = 2896
REQUIRED_COLUMNS = {"REG", "POPTOT", "HApoly", "Surfacesbois", "Airbat"}

CSV_MIRRORS = [
    "https://vincentarelbundock.github.io/Rdatasets/csv/sampling/swissmunicipalities.csv",
]
RDA_MIRRORS = [
    "https://raw.githubusercontent.com/cran/sampling/master/data/swissmunicipalities.rda",
]


def download(url: str) -> bytes:
    print(f"fetching {url}")
    with urllib.request.urlopen(url, timeout=60) as response:
        return response.read()


def validate_and_write(rows: list[dict]) -> None:
    missing = REQUIRED_COLUMNS - set(rows[0])
    if missing:
        raise SystemExit(f"frame is missing columns: {sorted(missing)}")
    if len(rows) != EXPECTED_ROWS:
        print(f"warning: expected {EXPECTED_ROWS} rows, got {len(rows)}", file=sys.stderr)
    OUT.parent.mkdir(parents=True, exist_ok=True)
    fieldnames = list(rows[0].keys())
    with OUT.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {OUT}")


def try_csv_mirrors() -> bool:
    for url in CSV_MIRRORS:
        try:
            text = download(url).decode("utf-8")
        except Exception as error:  # noqa: BLE001 - report and move on
            print(f"  failed: {error}", file=sys.stderr)
            continue
        rows = list(csv.DictReader(io.StringIO(text)))
        if rows:
            validate_and_write(rows)
            return True
    return False


def try_rda_mirrors() -> bool:
    try:
        import pyreadr  # type: ignore
    except ImportError:
        print("installing pyreadr for .rda parsing")
        subprocess.run([sys.executable, "-m", "pip", "install", "pyreadr"], check=True)
        import pyreadr  # type: ignore

    for url in RDA_MIRRORS:
        try:
            blob = download(url)
        except Exception as error:  # noqa: BLE001
            print(f"  failed: {error}", file=sys.stderr)
            continue
        tmp = OUT.parent / "swissmunicipalities.rda"
        tmp.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_bytes(blob)
        frames = pyreadr.read_r(str(tmp))
        tmp.unlink()
        frame = frames["swissmunicipalities"]
        rows = frame.to_dict(orient="records")
        validate_and_write([{k: v for k, v in row.items()} for row in rows])
        return True
    return False


def main() -> int:
    if OUT.exists():
        print(f"{OUT} already exists; delete it to re-fetch")
        return 0
    if try_csv_mirrors() or try_rda_mirrors():
        return 0
    print("all sources failed; fetch the frame manually and save it as data/swissmunicipalities.csv",
          file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
