#!/usr/bin/env python3
"""Download quarterly U.S. GNP levels from FRED and write a ``date,level`` CSV.

The package never touches the network; run this once, then point
``ARFIMA_GNP_CSV`` (or ``arfima-bayes gnp --input``) at the output.

    python scripts/fetch_gnp.py -o data/gnp_levels.csv
"""

import argparse
import csv
import io
import sys
import urllib.request

URL = "https://fred.stlouisfed.org/graph/fredgraph.csv?id=GNP"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-o", "--output", default="data/gnp_levels.csv")
    ap.add_argument("--start", default="1947-01-01")
    # 309 levels, so the log-returns have length 308
    ap.add_argument("--end", default="2024-01-01", help="last quarter kept (inclusive)")
    args = ap.parse_args(argv)

    with urllib.request.urlopen(URL, timeout=60) as resp:
        text = resp.read().decode()
    rows = list(csv.reader(io.StringIO(text)))
    kept = [(d, v) for d, v in rows[1:] if args.start <= d <= args.end and v not in ("", ".")]
    with open(args.output, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "level"])
        w.writerows(kept)
    print(f"wrote {len(kept)} quarters ({len(kept) - 1} returns) to {args.output}", file=sys.stderr)


if __name__ == "__main__":
    main()
