"""Required landing length against field slope for the default aircraft.

Prints ground roll and the firm/wet grass lengths from -12 % to +20 %,
marking slopes steeper than the -10 % downhill limit.

    python3 demos/slope_table.py
"""

from elfkit.groundroll import (GRASS_FIRM, WET_SHORT_GRASS, AircraftConfig, Atmosphere,
                               NonStoppingError, ground_roll_distance, required_length,
                               slope_angle)
from elfkit.search import MAX_DOWNSLOPE_PCT


def main() -> None:
    air, atm = AircraftConfig(), Atmosphere()
    print(f"{'slope %':>8} {'roll m':>9} {'grass m':>9} {'wet m':>9}")
    for pct in (-12, -10, -8, -6, -4, -2, 0, 2, 4, 8, 12, 16, 18.66, 20):
        try:
            s = ground_roll_distance(air, atm, slope_angle(pct))
        except NonStoppingError:
            print(f"{pct:8.2f}  does not stop")
            continue
        note = "  (too steep downhill)" if pct <= MAX_DOWNSLOPE_PCT else ""
        print(f"{pct:8.2f} {s:9.3f} {required_length(s, GRASS_FIRM, pct):9.3f} "
              f"{required_length(s, WET_SHORT_GRASS, pct):9.3f}{note}")


if __name__ == "__main__":
    main()
