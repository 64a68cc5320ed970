"""Convert a per-premises outbreak table to the FMD CSV read by ``cilm``.

Input columns (names configurable): premises id, easting, northing,
exposure date and cull date, dates as ISO ``YYYY-MM-DD`` or blank.
Days are counted from ``--origin``. Output: ``id,x,y,infection_day,removal_day``
with ids renumbered 0..N-1 in input order.

    python3 scripts/convert_fmd.py farms.csv fmd.csv --origin 2001-02-01
"""
import argparse
import csv
from datetime import date


def day(value, origin):
    value = value.strip()
    return "" if not value else str((date.fromisoformat(value) - origin).days)


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("src")
    ap.add_argument("dst")
    ap.add_argument("--origin", required=True, help="date mapped to day 0")
    ap.add_argument("--x", default="easting")
    ap.add_argument("--y", default="northing")
    ap.add_argument("--exposed", default="exposure_date")
    ap.add_argument("--culled", default="cull_date")
    ap.add_argument("--scale", type=float, default=1000.0, help="divide coordinates (m to km)")
    args = ap.parse_args()
    origin = date.fromisoformat(args.origin)
    with open(args.src, newline="") as fh, open(args.dst, "w", newline="") as out:
        w = csv.writer(out)
        w.writerow(["id", "x", "y", "infection_day", "removal_day"])
        for i, row in enumerate(csv.DictReader(fh)):
            w.writerow([i, repr(float(row[args.x]) / args.scale),
                        repr(float(row[args.y]) / args.scale),
                        day(row[args.exposed], origin), day(row[args.culled], origin)])
