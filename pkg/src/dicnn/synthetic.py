"""Synthetic datasets.

Two generators: a tiny deterministic separable two-class set for smoke
tests, and a KronoDroid-shaped CSV (static/dynamic style feature columns,
family labels, identifier columns, optional missing cells) for running the
full pipeline at desk scale when the real corpus is not on disk.
"""

from __future__ import annotations

import csv

import numpy as np

FAMILY_DEFAULTS = {"SMS": 1500, "BankBot": 1200, "Airpush": 1300}
ID_COLUMNS = ("package_name", "sha256")
LABEL_COLUMN = "family"


def separable_blobs(
    n_samples: int = 40, n_features: int = 16, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Two well-separated Gaussian blobs; labels alternate 0,1,0,1,..."""
    rng = np.random.Generator(np.random.PCG64(seed))
    labels = np.arange(n_samples) % 2
    centers = np.where(labels[:, None] == 1, 0.8, -0.8)
    x = centers + 0.3 * rng.standard_normal((n_samples, n_features))
    return x, labels.astype(np.int64)


def _feature_names(n_features: int) -> list[str]:
    names = []
    prefixes = ("perm", "intent", "api", "syscall")
    for i in range(n_features):
        names.append(f"{prefixes[i % len(prefixes)]}_{i:03d}")
    return names


def kronodroid_like_rows(
    n_benign: int = 3000,
    families: dict[str, int] | None = None,
    n_features: int = 489,
    seed: int = 0,
    missing_rate: float = 0.0,
    signal_floor: float = 0.35,
):
    """Header and rows of a synthetic malware feature table.

    Each family owns a block of binary columns whose firing probability is
    elevated relative to benign, plus a block of shifted numeric columns.
    A per-row intensity in [signal_floor, 1] scales how strongly that row
    expresses its family's signature, so some rows sit near the decision
    boundary.  A handful of columns are constant everywhere, and two
    identifier columns carry non-numeric strings.
    """
    families = dict(FAMILY_DEFAULTS if families is None else families)
    rng = np.random.Generator(np.random.PCG64(seed))
    names = _feature_names(n_features)
    n_const = min(8, n_features // 60)
    block = max(8, min(48, (n_features - n_const) // (2 * max(len(families), 1) + 2)))

    # column layout: per-family binary block, per-family numeric block,
    # shared malware block, constants, the rest is class-independent noise
    cursor = 0
    binary_blocks, numeric_blocks = {}, {}
    for fam in sorted(families):
        binary_blocks[fam] = range(cursor, cursor + block)
        cursor += block
    for fam in sorted(families):
        numeric_blocks[fam] = range(cursor, cursor + block // 3)
        cursor += block // 3
    shared_block = range(cursor, cursor + block // 2)
    cursor += block // 2
    const_block = range(cursor, cursor + n_const)
    cursor += n_const
    noise_binary = range(cursor, cursor + (n_features - cursor) // 2)
    # remaining columns are numeric noise

    labels = ["benign"] * n_benign
    for fam, count in sorted(families.items()):
        labels.extend([fam] * count)
    n_rows = len(labels)

    base_p = rng.uniform(0.02, 0.12, size=n_features)
    values = (rng.random((n_rows, n_features)) < base_p).astype(np.float64)
    numeric_cols = np.zeros(n_features, dtype=bool)
    numeric_cols[noise_binary.stop :] = True  # numeric noise tail
    for fam in families:
        numeric_cols[list(numeric_blocks[fam])] = True
    values[:, numeric_cols] = rng.normal(
        0.0, 1.0, size=(n_rows, int(numeric_cols.sum()))
    )

    intensity = rng.uniform(signal_floor, 1.0, size=n_rows)
    for fam in families:
        rows = np.array([i for i, l in enumerate(labels) if l == fam])
        for cols, lift in ((binary_blocks[fam], 0.55), (shared_block, 0.35)):
            cols = list(cols)
            fire = rng.random((rows.size, len(cols))) < (
                base_p[cols][None, :] + lift * intensity[rows][:, None]
            )
            values[np.ix_(rows, cols)] = fire.astype(np.float64)
        cols = list(numeric_blocks[fam])
        values[np.ix_(rows, cols)] = rng.normal(
            0.0, 1.0, size=(rows.size, len(cols))
        ) + 1.4 * intensity[rows][:, None]
    values[:, list(const_block)] = 1.0

    header = list(ID_COLUMNS) + [LABEL_COLUMN] + names
    rows_out = []
    for i in range(n_rows):
        cells = [f"app.example.pkg{i:06d}", f"{rng.integers(0, 2**63):016x}"]
        cells.append(labels[i])
        for j in range(n_features):
            if missing_rate > 0 and rng.random() < missing_rate:
                cells.append("")
            else:
                v = values[i, j]
                cells.append(str(int(v)) if v == int(v) else f"{v:.6f}")
        rows_out.append(cells)
    return header, rows_out


def write_kronodroid_csv(path, **kwargs) -> None:
    header, rows = kronodroid_like_rows(**kwargs)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
