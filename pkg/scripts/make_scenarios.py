"""Regenerate the shipped scenario data files.

Run from the repository root:  python3 scripts/make_scenarios.py
Deterministic; overwrites scenarios/ in place.
"""

import csv
import json
import os
import random

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "scenarios")

STATIONS = [
    ("ashburn", 39.0438, -77.4874),
    ("columbus", 39.9612, -82.9988),
    ("montreal", 45.5019, -73.5674),
    ("toronto", 43.6532, -79.3832),
    ("boardman", 45.8399, -119.7006),
    ("sanjose", 37.3382, -121.8863),
    ("phoenix", 33.4484, -112.0740),
    ("dallas", 32.7767, -96.7970),
    ("saopaulo", -23.5505, -46.6333),
    ("santiago", -33.4489, -70.6693),
    ("bogota", 4.7110, -74.0721),
    ("queretaro", 20.5888, -100.3899),
    ("dublin", 53.3498, -6.2603),
    ("london", 51.5074, -0.1278),
    ("paris", 48.8566, 2.3522),
    ("frankfurt", 50.1109, 8.6821),
    ("milan", 45.4642, 9.1900),
    ("madrid", 40.4168, -3.7038),
    ("stockholm", 59.3293, 18.0686),
    ("zurich", 47.3769, 8.5417),
    ("warsaw", 52.2297, 21.0122),
    ("capetown", -33.9249, 18.4241),
    ("johannesburg", -26.2041, 28.0473),
    ("lagos", 6.5244, 3.3792),
    ("nairobi", -1.2921, 36.8219),
    ("bahrain", 26.0667, 50.5577),
    ("dubai", 25.2048, 55.2708),
    ("telaviv", 32.0853, 34.7818),
    ("mumbai", 19.0760, 72.8777),
    ("hyderabad", 17.3850, 78.4867),
    ("singapore", 1.3521, 103.8198),
    ("jakarta", -6.2088, 106.8456),
    ("bangkok", 13.7563, 100.5018),
    ("hongkong", 22.3193, 114.1694),
    ("taipei", 25.0330, 121.5654),
    ("seoul", 37.5665, 126.9780),
    ("tokyo", 35.6762, 139.6503),
    ("osaka", 34.6937, 135.5023),
    ("sydney", -33.8688, 151.2093),
    ("melbourne", -37.8136, 144.9631),
]

ANCHORS = [
    "ashburn", "montreal", "boardman", "sanjose", "dallas",
    "saopaulo", "bogota", "dublin", "london", "paris",
    "frankfurt", "madrid", "capetown", "bahrain", "mumbai",
    "singapore", "hongkong", "seoul", "tokyo", "sydney",
]

SERVER_CITIES = [
    ("srv-ashburn", 39.0438, -77.4874),
    ("srv-seattle", 47.6062, -122.3321),
    ("srv-mexico", 19.4326, -99.1332),
    ("srv-saopaulo", -23.5505, -46.6333),
    ("srv-buenosaires", -34.6037, -58.3816),
    ("srv-lima", -12.0464, -77.0428),
    ("srv-london", 51.5074, -0.1278),
    ("srv-paris", 48.8566, 2.3522),
    ("srv-frankfurt", 50.1109, 8.6821),
    ("srv-amsterdam", 52.3676, 4.9041),
    ("srv-milan", 45.4642, 9.1900),
    ("srv-madrid", 40.4168, -3.7038),
    ("srv-warsaw", 52.2297, 21.0122),
    ("srv-istanbul", 41.0082, 28.9784),
    ("srv-johannesburg", -26.2041, 28.0473),
    ("srv-lagos", 6.5244, 3.3792),
    ("srv-dubai", 25.2048, 55.2708),
    ("srv-mumbai", 19.0760, 72.8777),
    ("srv-singapore", 1.3521, 103.8198),
    ("srv-jakarta", -6.2088, 106.8456),
    ("srv-hongkong", 22.3193, 114.1694),
    ("srv-seoul", 37.5665, 126.9780),
    ("srv-tokyo", 35.6762, 139.6503),
    ("srv-sydney", -33.8688, 151.2093),
    ("srv-auckland", -36.8509, 174.7645),
]


def make_users(rng: random.Random, count: int):
    """Atlantic traffic mix: corridor flights plus wider ocean tracks."""
    users = []
    for i in range(count):
        if i % 5 < 3:  # north atlantic corridor
            lat = rng.uniform(36.0, 54.0)
            lon = rng.uniform(-58.0, -12.0)
        else:  # central / south atlantic
            lat = rng.uniform(-30.0, 36.0)
            lon = rng.uniform(-48.0, 2.0)
        dlat = rng.uniform(-1.2, 1.2)
        dlon = rng.uniform(-2.5, 2.5)
        users.append(
            {
                "id": f"u{i:03d}",
                "waypoints": [
                    [0.0, round(lat, 4), round(lon, 4)],
                    [900.0, round(lat + dlat, 4), round(lon + dlon, 4)],
                ],
            }
        )
    return users


def main() -> None:
    os.makedirs(ROOT, exist_ok=True)
    rng = random.Random(20260301)

    with open(os.path.join(ROOT, "stations.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "lat_deg", "lon_deg"])
        for sid, lat, lon in STATIONS:
            w.writerow([sid, lat, lon])

    servers = []
    geo_rows = []
    for i, (sid, lat, lon) in enumerate(SERVER_CITIES):
        address = f"198.18.{i}.10"
        servers.append({"id": sid, "lat_deg": lat, "lon_deg": lon, "address": address})
        geo_rows.append([f"198.18.{i}.0/24", lat, lon])

    with open(os.path.join(ROOT, "geo.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cidr", "lat_deg", "lon_deg"])
        w.writerows(geo_rows)

    atlantic = {
        "name": "atlantic",
        "seed": 7,
        "constellation": "starlink",
        "epochs": {"start": 60.0, "step": 280.0, "count": 4},
        "stations_csv": "stations.csv",
        "anchors": ANCHORS,
        "users": make_users(rng, 100),
        "servers": servers,
        "geo_csv": "geo.csv",
        "path_updates": {"enabled": True, "noise_sigma_ms": 0.5, "geo_error_fraction": 0.0},
    }
    with open(os.path.join(ROOT, "atlantic.json"), "w") as fh:
        json.dump(atlantic, fh, indent=2)
        fh.write("\n")

    table1 = {
        "name": "table1",
        "seed": 7,
        "constellation": "starlink",
        "epochs": {"start": 60.0, "step": 60.0, "count": 1},
        "stations": [
            {"id": "ashburn", "lat_deg": 39.0438, "lon_deg": -77.4874},
            {"id": "london", "lat_deg": 51.5074, "lon_deg": -0.1278},
        ],
        "anchors": ["ashburn", "london"],
        "users": [{"id": "transatlantic-ue", "waypoints": [[0.0, 42.2, -60.0]]}],
        "servers": [
            {"id": "srv-paris", "lat_deg": 48.8566, "lon_deg": 2.3522, "address": "198.18.7.10"}
        ],
    }
    with open(os.path.join(ROOT, "table1.json"), "w") as fh:
        json.dump(table1, fh, indent=2)
        fh.write("\n")

    print(f"wrote scenarios to {os.path.abspath(ROOT)}")


if __name__ == "__main__":
    main()
