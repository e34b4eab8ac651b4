#!/usr/bin/env python3
"""Generate the bundled synthetic arrival-table CSV.

The table emulates the shape of a ray-traced transmission-loss grid for a
deep-water environment without redistributing any real dataset: spreading
plus absorption as the trend, a smooth depth/range ripple as stand-in for
multipath interference structure, and a mildly depth-dependent effective
sound speed for the arrival delays.

Usage: python tools/make_arrival_table.py [out.csv]
"""

import math
import sys
from pathlib import Path

FREQ_KHZ = 12.0
RANGES = [float(r) for r in range(500, 5001, 500)]
DEPTHS = [10.0, 30.0, 50.0, 70.0, 90.0]


def absorption_db_per_km(f_khz: float) -> float:
    f2 = f_khz * f_khz
    return 0.11 * f2 / (1 + f2) + 44 * f2 / (4100 + f2) + 2.75e-4 * f2 + 0.003


def tl_db(range_m: float, tx_depth: float, rx_depth: float) -> float:
    slant = math.hypot(range_m, rx_depth - tx_depth)
    trend = 15.0 * math.log10(max(slant, 1.0)) + absorption_db_per_km(FREQ_KHZ) * slant / 1000.0
    ripple = 3.0 * math.sin(range_m / 700.0 + tx_depth / 25.0) \
        + 2.0 * math.cos(range_m / 450.0 - rx_depth / 18.0)
    return round(trend + ripple, 4)


def delay_s(range_m: float, tx_depth: float, rx_depth: float) -> float:
    slant = math.hypot(range_m, rx_depth - tx_depth)
    c_eff = 1487.0 + 0.05 * (tx_depth + rx_depth) / 2.0
    return round(slant / c_eff, 6)


def main() -> None:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parent.parent / "src" / "uansim" / "data"
        / "arrival_table_sample.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# frequency_khz = {FREQ_KHZ}",
             "# label = synthetic-deep-water",
             "range_m,tx_depth_m,rx_depth_m,tl_db,delay_s"]
    for r in RANGES:
        for td in DEPTHS:
            for xd in DEPTHS:
                lines.append(f"{r},{td},{xd},{tl_db(r, td, xd)},{delay_s(r, td, xd)}")
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {out} ({len(RANGES) * len(DEPTHS) ** 2} grid points)")


if __name__ == "__main__":
    main()
