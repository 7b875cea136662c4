"""Regenerates the synthetic data fixtures (deterministic, numpy only).

Run from the repository root: python3 fixtures/generate_fixtures.py
"""

import json
import math
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent
LAT, LON, TZ = 9.66, -73.75, -5.0
HEADER = ["Fecha", "GHI", "Presion", "Temperatura Ambiente", "Wind Speed", "Wind Direction"]


def cos_zenith(t: datetime) -> float:
    doy = t.timetuple().tm_yday
    decl = math.radians(23.45) * math.sin(2 * math.pi * (284 + doy) / 365)
    hours = t.hour + t.minute / 60 - TZ + LON / 15
    hour_angle = math.radians(15 * (hours - 12))
    lat = math.radians(LAT)
    return math.sin(lat) * math.sin(decl) + math.cos(lat) * math.cos(decl) * math.cos(hour_angle)


def clear_ghi(t: datetime) -> float:
    cz = cos_zenith(t)
    if cz <= 0:
        return 0.0
    return 1098.0 * cz * math.exp(-0.057 / cz)


def stamps(start: datetime, step_min: int, n: int):
    return [start + timedelta(minutes=step_min * i) for i in range(n)]


def weather_rows(ts, rng, cloudiness=0.25):
    rows = []
    cloud = 1.0
    for t in ts:
        cloud = min(1.0, max(0.2, cloud + rng.normal(0, 0.05) + 0.02 * (1 - cloud)))
        frac = (t.hour + t.minute / 60 - 6) / 24 * 2 * math.pi
        ghi = clear_ghi(t) * (1 - cloudiness * (1 - cloud))
        rows.append(
            [
                t.strftime("%Y-%m-%d %H:%M:%S"),
                round(ghi, 2),
                round(1003.5 + 0.6 * math.sin(2 * frac) + rng.normal(0, 0.1), 2),
                round(26.0 + 5.0 * math.sin(frac) + rng.normal(0, 0.3), 2),
                round(abs(1.6 + 0.8 * math.sin(frac) + rng.normal(0, 0.3)), 2),
                round(float(rng.uniform(0, 360)), 2),
            ]
        )
    return rows


def write_table4(path: Path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        f.write(",".join(HEADER) + "\n")
        for r in rows:
            f.write(",".join("" if v is None else str(v) for v in r) + "\n")


def table4_sample(rng):
    ts = stamps(datetime(2022, 2, 22), 10, 36)
    rows = weather_rows(ts, rng)
    known = {
        0: [0.0, 1003.76, 24.15, 1.31, 276.59],
        1: [0.0, 1003.57, 24.06, 1.31, 226.54],
        2: [0.0, 1003.43, 24.18, 1.15, 284.79],
        33: [0.36, 1003.06, 22.97, 1.48, 257.64],
        34: [0.38, 1003.18, 22.99, 1.69, 274.66],
        35: [0.40, 1003.25, 23.03, 1.75, 228.60],
    }
    for i, vals in known.items():
        rows[i][1:] = vals
    write_table4(ROOT / "measurements" / "table4_sample.csv", rows)


def holes(rng, days=14, fraction=0.08):
    n = days * 144
    rows = weather_rows(stamps(datetime(2022, 2, 1), 10, n), rng)
    k = round(fraction * n)
    for col in range(1, 6):
        for i in rng.choice(n, size=k, replace=False):
            rows[i][col] = None
    write_table4(ROOT / "measurements" / "elpaso_holes.csv", rows)
    return rows


def history(rng):
    rows = weather_rows(stamps(datetime(2020, 5, 1), 10, 14 * 144), rng)
    write_table4(ROOT / "historical" / "elpaso_2020.csv", rows)


def gfs():
    ts = stamps(datetime(2024, 5, 8, 23), 60, 27)
    path = ROOT / "gfs" / "gfs_20240509.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        f.write("timestamp,GHI\n")
        for t in ts:
            f.write(f"{t:%Y-%m-%d %H:%M:%S},{round(0.9 * clear_ghi(t), 2)}\n")


def reuniwatt(rng):
    for day, casts in [
        (datetime(2024, 5, 8), ["daycast", "hourcast", "instacast"]),
        (datetime(2024, 5, 9), ["daycast", "hourcast"]),
    ]:
        payload = {"date": f"{day:%Y%m%d}"}
        for cast, step, scale in [("daycast", 60, 0.88), ("hourcast", 15, 0.9), ("instacast", 5, 0.92)]:
            if cast not in casts:
                continue
            n = {"daycast": 24, "hourcast": 24 * 4, "instacast": 24 * 12}[cast]
            payload[cast] = [
                {"timestamp": f"{t:%Y-%m-%dT%H:%M:%S}", "ghi": round(scale * clear_ghi(t), 2)}
                for t in stamps(day, step, n)
            ]
        payload["images"] = [
            {"name": f"sky_{day:%Y%m%d}_{h:02d}00.jpg", "url": f"/images/{day:%Y%m%d}/sky_{h:02d}00.jpg"}
            for h in (9, 12)
        ]
        path = ROOT / "reuniwatt" / f"{day:%Y%m%d}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=1) + "\n")


def pi(rng):
    ts = stamps(datetime(2024, 5, 9), 1, 1440)
    items = []
    for r in weather_rows(ts, rng):
        items.append(
            {
                "Timestamp": r[0].replace(" ", "T"),
                "GHI": r[1],
                "Presion": r[2],
                "Temperatura Ambiente": r[3],
                "Wind Speed": r[4],
                "Wind Direction": r[5],
            }
        )
    path = ROOT / "pi" / "20240509_minute.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"Items": items}) + "\n")


def model_runs(rng, observed_rows, days=5):
    obs = {r[0]: r[1] for r in observed_rows}
    models = {"LSTM": 0.06, "Transformer": 0.09}
    out = ROOT / "models"
    out.mkdir(parents=True, exist_ok=True)
    with (out / "horizons.csv").open("w") as f:
        f.write("series_id,horizon,plant,sensor,model,resolution\n")
        sid = 0
        ids = {}
        for m in models:
            for h in range(1, 37):
                sid += 1
                ids[(m, h)] = sid
                f.write(f"{sid},{h},El Paso,GHI pyranometer 1,{m},10\n")
    with (out / "runs.csv").open("w") as f:
        f.write("timestamp,value,series_id\n")
        for d in range(days):
            for hour in range(5, 18):
                issue = datetime(2022, 2, 1 + d, hour)
                for m, noise in models.items():
                    for h in range(1, 37):
                        target = issue + timedelta(minutes=10 * h)
                        base = obs.get(target.strftime("%Y-%m-%d %H:%M:%S"))
                        if base is None:
                            base = clear_ghi(target)
                        err = rng.normal(0, noise * (1 + h / 12)) * max(base, 20.0)
                        f.write(f"{issue:%Y-%m-%d %H:%M:%S},{round(max(0.0, base + err), 2)},{ids[(m, h)]}\n")


def main():
    rng = np.random.default_rng(20240509)
    table4_sample(rng)
    rows = holes(rng)
    history(rng)
    gfs()
    reuniwatt(rng)
    pi(rng)
    model_runs(rng, rows)


if __name__ == "__main__":
    main()
