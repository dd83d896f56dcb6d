"""Seeded synthetic sensor data with known ground truth.

``separable``: only LDR depends on the person. ``schedule``: each person
holds two disjoint time blocks per cycle, sampled every 4 s.
``var_system``: Temp, Hum, LDR and Gas follow a stable VAR with published
coefficients.
"""

from datetime import datetime, timedelta

import numpy as np

from .dataset import NO_PERSON, SensorRecord, format_timestamp
from .errors import ParameterError
from .timeseries import SERIES_NAMES, spectral_radius

PERSONS = ("Ajitkumar", "Swaroop", "Unknown", "Yogita")
START = datetime(2018, 9, 13, 10, 59, 19, 319301)
CADENCE = timedelta(seconds=4)

PROFILES = ("separable", "schedule", "var_system")

# standardized-space VAR coefficients, keyed by order; the order-1 system is
# persistent (radius ~0.92) like slowly drifting room sensors
DEFAULT_COEFS = {
    1: [
        [[0.8, 0.1, 0.0, 0.0], [0.1, 0.7, 0.1, 0.0], [0.0, 0.1, 0.75, 0.1], [0.05, 0.0, 0.1, 0.8]],
    ],
    2: [
        [[0.5, 0.1, 0.0, 0.0], [0.1, 0.4, 0.1, 0.0], [0.0, 0.1, 0.3, 0.1], [0.05, 0.0, 0.1, 0.4]],
        [[-0.3, 0.0, 0.1, 0.0], [0.0, -0.25, 0.0, 0.1], [0.1, 0.0, -0.3, 0.0], [0.0, 0.1, 0.0, -0.2]],
    ],
    3: [
        [[0.4, 0.1, 0.0, 0.0], [0.1, 0.4, 0.1, 0.0], [0.0, 0.1, 0.3, 0.1], [0.05, 0.0, 0.1, 0.4]],
        [[-0.3, 0.0, 0.1, 0.0], [0.0, -0.25, 0.0, 0.1], [0.1, 0.0, -0.3, 0.0], [0.0, 0.1, 0.0, -0.2]],
        [[0.2, 0.0, 0.0, 0.0], [0.0, 0.2, 0.0, 0.0], [0.0, 0.0, 0.2, 0.0], [0.0, 0.0, 0.0, 0.2]],
    ],
}
SERIES_MEAN = np.array([26.0, 65.0, 280.0, 5.0])  # Temp, Hum, LDR, Gas
SERIES_SCALE = np.array([0.5, 2.0, 15.0, 0.2])


def _check_size(size):
    if size < 10:
        raise ParameterError("size must be >= 10")


def _timestamps(size, start=START):
    return [start + i * CADENCE for i in range(size)]


def separable(size, seed=0):
    """Four people distinguishable by LDR alone (gaps of 30 lux between bands)."""
    _check_size(size)
    rng = np.random.default_rng(seed)
    people = rng.integers(0, len(PERSONS), size)
    ldr_center = np.array([150.0, 200.0, 250.0, 300.0])
    ldr = ldr_center[people] + rng.uniform(-10.0, 10.0, size)
    temp = rng.uniform(24.0, 28.0, size)
    gas = rng.uniform(0.05, 0.2, size)
    hum = rng.uniform(60.0, 70.0, size)
    pir = rng.integers(0, 2, size)
    return [
        SensorRecord(PERSONS[p], round(t, 2), round(l, 2), round(g, 3), "Yes" if q else "No",
                     round(h, 2), ts)
        for p, t, l, g, q, h, ts in zip(people, temp, ldr, gas, pir, hum, _timestamps(size))
    ]


def schedule_blocks(size, n_cycles=1, start=START):
    """Row ranges of the shift schedule: each cycle visits every person twice."""
    pattern = list(range(len(PERSONS))) * 2
    chunks = np.array_split(np.arange(size), n_cycles * len(pattern))
    blocks = []
    for i, rows in enumerate(chunks):
        person = PERSONS[pattern[i % len(pattern)]]
        blocks.append({
            "person": person,
            "first_row": int(rows[0]),
            "last_row": int(rows[-1]),
            "start": format_timestamp(start + int(rows[0]) * CADENCE),
            "end": format_timestamp(start + int(rows[-1]) * CADENCE),
        })
    return blocks


def schedule(size, seed=0, n_cycles=1):
    """Records whose person depends only on the time block; sensors are noise."""
    _check_size(size)
    rng = np.random.default_rng(seed)
    blocks = schedule_blocks(size, n_cycles)
    people = np.empty(size, dtype=object)
    for b in blocks:
        people[b["first_row"]:b["last_row"] + 1] = b["person"]
    temp = rng.uniform(24.0, 28.0, size)
    ldr = rng.uniform(200.0, 300.0, size)
    gas = rng.uniform(0.05, 0.2, size)
    hum = rng.uniform(60.0, 70.0, size)
    pir = rng.integers(0, 2, size)
    records = [
        SensorRecord(p, round(t, 2), round(l, 2), round(g, 3), "Yes" if q else "No", round(h, 2), ts)
        for p, t, l, g, q, h, ts in zip(people, temp, ldr, gas, pir, hum, _timestamps(size))
    ]
    return records, {"profile": "schedule", "cadence_seconds": 4, "blocks": blocks}


def var_truth(coefs, mean=SERIES_MEAN, scale=SERIES_SCALE):
    """Intercept and lag matrices in sensor units for standardized coefficients ``coefs``."""
    coefs = np.asarray(coefs, dtype=float)
    S, S_inv = np.diag(scale), np.diag(1.0 / scale)
    unit_coefs = np.stack([S @ A @ S_inv for A in coefs])
    intercept = (np.eye(len(mean)) - unit_coefs.sum(axis=0)) @ mean
    return intercept, unit_coefs


def var_system(size, seed=0, order=2, noise=1.0, coefs=None, burn_in=200):
    """Temp/Hum/LDR/Gas from a stable VAR; returns ``(records, truth)``.

    ``noise`` is the innovation standard deviation in standardized units.
    With ``noise == 0`` the path starts from random initial values and runs
    without burn-in so the dynamics stay excited.
    """
    _check_size(size)
    if coefs is None:
        if order not in DEFAULT_COEFS:
            raise ParameterError(f"no default coefficients for order {order}; pass coefs")
        coefs = DEFAULT_COEFS[order]
    coefs = np.asarray(coefs, dtype=float)
    if coefs.ndim != 3 or coefs.shape[1:] != (4, 4):
        raise ParameterError("coefs must have shape (order, 4, 4)")
    order = coefs.shape[0]
    radius = spectral_radius(coefs)
    if radius >= 1.0:
        raise ParameterError(f"VAR coefficients are unstable (spectral radius {radius:.4f} >= 1)")
    if noise < 0:
        raise ParameterError("noise must be >= 0")

    rng = np.random.default_rng(seed)
    skip = burn_in if noise > 0 else 0
    total = size + skip
    z = np.zeros((total, 4))
    if noise == 0:
        z[:order] = rng.standard_normal((order, 4))
    shocks = rng.standard_normal((total, 4)) * noise
    for t in range(order, total):
        z[t] = sum(coefs[l] @ z[t - 1 - l] for l in range(order)) + shocks[t]
    y = SERIES_MEAN + SERIES_SCALE * z[skip:]

    intercept, unit_coefs = var_truth(coefs)
    people = rng.integers(0, len(PERSONS), size)
    pir = rng.integers(0, 2, size)
    idx = {n: i for i, n in enumerate(SERIES_NAMES)}
    records = [
        SensorRecord(PERSONS[p], float(row[idx["Temp"]]), float(row[idx["LDR"]]),
                     float(row[idx["Gas"]]), "Yes" if q else "No", float(row[idx["Hum"]]), ts)
        for p, q, row, ts in zip(people, pir, y, _timestamps(size))
    ]
    truth = {
        "profile": "var_system",
        "names": list(SERIES_NAMES),
        "order": int(order),
        "noise": float(noise),
        "seed": seed,
        "spectral_radius": radius,
        "intercept": intercept.tolist(),
        "coefs": unit_coefs.tolist(),
        "standardized_coefs": coefs.tolist(),
        "mean": SERIES_MEAN.tolist(),
        "scale": SERIES_SCALE.tolist(),
    }
    return records, truth


def detection_stream(size, seed=0, detection_rate=0.3):
    """Records at a 4 s cadence where exactly ``round(size * rate)`` carry a person.

    Rows without a detection have person ``No person``.
    """
    _check_size(size)
    if not 0 <= detection_rate <= 1:
        raise ParameterError("detection_rate must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    base = separable(size, seed)
    n_detect = int(round(size * detection_rate))
    detected = np.zeros(size, dtype=bool)
    detected[rng.choice(size, n_detect, replace=False)] = True
    return [r if d else SensorRecord(NO_PERSON, r.temp_c, r.ldr_lux, r.gas_ppm, r.pir, r.hum_pct,
                                     r.timestamp)
            for r, d in zip(base, detected)]
