"""Regenerates geodesic_pairs.csv from GeographicLib (WGS84, Karney's algorithm)."""
import math
import random

from geographiclib.geodesic import Geodesic

rng = random.Random(20240611)
g = Geodesic.WGS84
rows = []
while len(rows) < 1000:
    lat1 = math.degrees(math.asin(rng.uniform(-1, 1)))
    lat2 = math.degrees(math.asin(rng.uniform(-1, 1)))
    lon1 = rng.uniform(-180, 180)
    lon2 = rng.uniform(-180, 180)
    # stay clear of the near-antipodal region
    c = (math.sin(math.radians(lat1)) * math.sin(math.radians(lat2))
         + math.cos(math.radians(lat1)) * math.cos(math.radians(lat2)) * math.cos(math.radians(lon2 - lon1)))
    if math.degrees(math.acos(max(-1.0, min(1.0, c)))) > 170.0:
        continue
    r = g.Inverse(lat1, lon1, lat2, lon2)
    rows.append((lat1, lon1, lat2, lon2, r["s12"] / 1000.0, r["azi1"] % 360.0))

with open("geodesic_pairs.csv", "w") as f:
    f.write("lat1,lon1,lat2,lon2,distance_km,azimuth_deg\n")
    for row in rows:
        f.write(",".join(repr(v) for v in row) + "\n")
