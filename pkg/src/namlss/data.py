"""Dataset ingestion, preprocessing, folds, synthetic data and samplers.

CSV ingestion uses RFC-4180 quoting (stdlib ``csv``) and rejects rows
containing missing-value tokens.  Numeric features are mapped affinely
onto [-1, 1]; categoricals are one-hot in lexicographic order.  The
synthetic generator draws features uniformly on the unit cube, pushes
them through four fixed parameter surfaces, activates the first K
surfaces with the target family's own output activations, and samples a
response per row with dependency-free samplers.
"""

import csv
import io
import json

import numpy as np

from . import families
from .errors import ConfigError, ContractError, DataError
from .rng import stream

MISSING_TOKENS = {"", "NA", "null"}

TARGET_TRANSFORMS = ("none", "standardize", "log")


class Dataset:
    """Model-ready design matrix and response.

    ``true_theta`` is only present for synthetic data: the raw (n, 4)
    parameter surfaces before activation, kept for oracle evaluation.
    """

    __slots__ = ("x", "y", "feature_names", "trials", "true_theta", "n_dropped")

    def __init__(self, x, y, feature_names, trials=None, true_theta=None, n_dropped=0):
        self.x = np.ascontiguousarray(x, dtype=np.float64)
        self.y = np.ascontiguousarray(y, dtype=np.float64)
        if self.x.ndim != 2 or self.y.ndim != 1 or self.x.shape[0] != self.y.shape[0]:
            raise DataError(f"X {self.x.shape} / y {self.y.shape} row mismatch")
        if len(feature_names) != self.x.shape[1]:
            raise DataError("one feature name per column required")
        self.feature_names = list(feature_names)
        self.trials = trials
        self.true_theta = true_theta
        self.n_dropped = int(n_dropped)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def n_features(self):
        return self.x.shape[1]

    def subset(self, indices):
        tt = None if self.true_theta is None else self.true_theta[indices]
        return Dataset(self.x[indices], self.y[indices], self.feature_names,
                       self.trials, tt, 0)


def read_csv(path_or_text, from_text=False):
    """Parse a headered CSV; returns (header, rows, n_dropped).

    Rows containing any of the missing tokens {"", "NA", "null"} are
    dropped and counted, as are rows whose width disagrees with the
    header.
    """
    if from_text:
        fh = io.StringIO(path_or_text)
        return _read_csv_handle(fh)
    with open(path_or_text, "r", newline="", encoding="utf-8") as fh:
        return _read_csv_handle(fh)


def _read_csv_handle(fh):
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty CSV: a header row is required") from None
    if len(set(header)) != len(header):
        raise DataError("duplicate column names in header")
    rows, dropped = [], 0
    for row in reader:
        if len(row) != len(header) or any(v in MISSING_TOKENS for v in row):
            dropped += 1
            continue
        rows.append(row)
    if not rows:
        raise DataError("no complete rows in CSV")
    return header, rows, dropped


def _is_numeric(values):
    try:
        for v in values:
            float(v)
        return True
    except ValueError:
        return False


class PreprocessSpec:
    """Stored column maps so new data can be transformed identically.

    ``columns`` is a list of (name, kind, detail): detail is (min, max)
    for numeric columns and the lexicographic category tuple for
    categorical ones.  The target transform is one of "none",
    "standardize" (z-score, population sd) or "log".
    """

    def __init__(self, columns, target_name, target_transform, target_stats):
        self.columns = columns
        self.target_name = target_name
        self.target_transform = target_transform
        self.target_stats = target_stats  # (mean, sd) for standardize, else None

    @property
    def feature_names(self):
        names = []
        for name, kind, detail in self.columns:
            if kind == "numeric":
                names.append(name)
            else:
                names.extend(f"{name}={c}" for c in detail)
        return names

    def transform_features(self, header, rows):
        """Apply the stored maps to raw string rows -> float design matrix."""
        pos = {h: i for i, h in enumerate(header)}
        for name, _, _ in self.columns:
            if name not in pos:
                raise DataError(f"column {name!r} missing from input")
        out = []
        for name, kind, detail in self.columns:
            col = [row[pos[name]] for row in rows]
            if kind == "numeric":
                lo, hi = detail
                vals = np.array([float(v) for v in col])
                out.append(2.0 * (vals - lo) / (hi - lo) - 1.0)
            else:
                cats = {c: i for i, c in enumerate(detail)}
                block = np.zeros((len(col), len(detail)))
                for r, v in enumerate(col):
                    if v not in cats:
                        raise DataError(f"unseen category {v!r} in column {name!r}")
                    block[r, cats[v]] = 1.0
                out.extend(block.T)
        return np.column_stack(out)

    def invert_numeric(self, name, scaled):
        for cname, kind, detail in self.columns:
            if cname == name and kind == "numeric":
                lo, hi = detail
                return (np.asarray(scaled) + 1.0) * (hi - lo) / 2.0 + lo
        raise ContractError(f"{name!r} is not a numeric feature column")

    def transform_target(self, y_raw):
        y = np.asarray(y_raw, dtype=np.float64)
        if self.target_transform == "none":
            return y.copy()
        if self.target_transform == "standardize":
            mean, sd = self.target_stats
            return (y - mean) / sd
        if np.any(y <= 0):
            raise DataError("log target transform requires y > 0")
        return np.log(y)

    def invert_target(self, y):
        y = np.asarray(y, dtype=np.float64)
        if self.target_transform == "none":
            return y.copy()
        if self.target_transform == "standardize":
            mean, sd = self.target_stats
            return y * sd + mean
        return np.exp(y)

    def to_dict(self):
        return {
            "columns": [
                [name, kind, list(detail)] for name, kind, detail in self.columns
            ],
            "target_name": self.target_name,
            "target_transform": self.target_transform,
            "target_stats": list(self.target_stats) if self.target_stats else None,
        }

    @classmethod
    def from_dict(cls, d):
        cols = [(name, kind, tuple(detail)) for name, kind, detail in d["columns"]]
        stats = tuple(d["target_stats"]) if d["target_stats"] else None
        return cls(cols, d["target_name"], d["target_transform"], stats)


def preprocess(header, rows, target, target_transform="none"):
    """Classify columns, fit the feature/target maps, apply them.

    Returns (Dataset, PreprocessSpec).  Quantile smoothing is
    deliberately not applied.
    """
    if target not in header:
        raise DataError(f"target column {target!r} not in header")
    if target_transform not in TARGET_TRANSFORMS:
        raise ConfigError(
            f"unknown target transform {target_transform!r}; choose from {TARGET_TRANSFORMS}"
        )
    pos = {h: i for i, h in enumerate(header)}
    y_raw = np.array([float(r[pos[target]]) for r in rows])

    columns = []
    for name in header:
        if name == target:
            continue
        col = [r[pos[name]] for r in rows]
        if _is_numeric(col):
            vals = np.array([float(v) for v in col])
            lo, hi = float(vals.min()), float(vals.max())
            if lo == hi:
                raise DataError(f"numeric column {name!r} is constant ({lo})")
            columns.append((name, "numeric", (lo, hi)))
        else:
            columns.append((name, "categorical", tuple(sorted(set(col)))))

    stats = None
    if target_transform == "standardize":
        stats = (float(np.mean(y_raw)), float(np.std(y_raw)))
        if stats[1] == 0:
            raise DataError("target column is constant; cannot standardize")
    spec = PreprocessSpec(columns, target, target_transform, stats)
    x = spec.transform_features(header, rows)
    y = spec.transform_target(y_raw)
    return Dataset(x, y, spec.feature_names), spec


class FoldPlan:
    """Disjoint shuffled folds covering range(n), sizes differing by <= 1."""

    __slots__ = ("folds", "n", "k", "seed")

    def __init__(self, folds, n, k, seed):
        self.folds = [np.asarray(f, dtype=np.int64) for f in folds]
        self.n, self.k, self.seed = n, k, seed

    def train_indices(self, i):
        return np.concatenate([f for j, f in enumerate(self.folds) if j != i])

    def test_indices(self, i):
        return self.folds[i]

    def to_json(self):
        return json.dumps(
            {"n": self.n, "k": self.k, "seed": self.seed,
             "folds": [f.tolist() for f in self.folds]},
            sort_keys=True,
        )


def kfold(n, k=5, seed=101) -> FoldPlan:
    if n < k:
        raise DataError(f"cannot make {k} folds from {n} rows")
    perm = stream(seed, "kfold", n, k).permutation(n)
    return FoldPlan(np.array_split(perm, k), n, k, seed)


# ---------------------------------------------------------------------------
# synthetic data


def synth_params(x):
    """The four fixed parameter surfaces over the unit cube, (n, 5) -> (n, 4)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != 5:
        raise DataError(f"synthetic features must be (n, 5), got {x.shape}")
    if np.any(x < 0.0) or np.any(x > 1.0) or not np.isfinite(x).all():
        raise DataError("synthetic features must lie in the unit cube")
    x1, x2, x3, x4, x5 = (x[:, i] for i in range(5))
    t1 = (30.0 / 13.0) * x1 / ((3.0 * x2 + 1.5) - 2.0 * np.sin(x3 / 2.0)) \
        + (113.0 / 115.0) * x4 + 0.1 * x5
    t2 = np.exp(-0.0035 * x1 + (x2 - 0.23) ** 2 - 1.42 * x3) + 0.0001 * x4
    t3 = (4.0 * x1 - 90.0 * x2) / 42.0
    t4 = np.exp(0.0323 * x2 + 0.0123 - 0.0234 * x4)
    return np.stack([t1, t2, t3, t4], axis=1)


class SynthConfig:
    __slots__ = ("family", "n", "seed", "trials")

    def __init__(self, family, n=3000, seed=0, trials=None):
        if n < 1:
            raise DataError("n must be >= 1")
        self.family = family
        self.n = int(n)
        self.seed = int(seed)
        self.trials = trials


def synth_dataset(config: SynthConfig) -> Dataset:
    """Draw features, derive true parameters, sample the response.

    The first K raw surfaces feed the family's own output activations,
    so the true parameters always satisfy the family's constraints.
    """
    fam = families.get_family(config.family)
    x = stream(config.seed, "synth-x").random((config.n, 5))
    theta = synth_params(x)
    params = families.activate(fam, theta[:, : fam.k])
    y = sample(fam, params, stream(config.seed, "synth-y"), trials=config.trials)
    trials = config.trials if fam.family_id == "binomial" else None
    if fam.family_id == "binomial" and trials is None:
        trials = 1
    return Dataset(x, y, [f"x{i}" for i in range(1, 6)], trials=trials, true_theta=theta)


def dataset_to_csv(ds: Dataset) -> str:
    """Serialize a synthetic dataset: x1..x5, y, true_theta1..4."""
    if ds.true_theta is None:
        raise ContractError("dataset has no true parameter surfaces to export")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ds.feature_names + ["y"] + [f"true_theta{i}" for i in range(1, 5)])
    for i in range(ds.n):
        writer.writerow(
            [repr(float(v)) for v in ds.x[i]]
            + [repr(float(ds.y[i]))]
            + [repr(float(v)) for v in ds.true_theta[i]]
        )
    return buf.getvalue()


def dataset_from_csv(text, family, trials=None) -> Dataset:
    """Inverse of :func:`dataset_to_csv` (accepts the CSV text)."""
    header, rows, dropped = read_csv(text, from_text=True)
    expected = [f"x{i}" for i in range(1, 6)] + ["y"] + [f"true_theta{i}" for i in range(1, 5)]
    if header[: len(expected)] != expected:
        raise DataError("not a synthetic-export CSV")
    arr = np.array([[float(v) for v in row] for row in rows])
    fam = families.get_family(family)
    trials = (trials if trials is not None else 1) if fam.family_id == "binomial" else None
    return Dataset(arr[:, :5], arr[:, 5], expected[:5], trials=trials,
                   true_theta=arr[:, 6:10], n_dropped=dropped)


# ---------------------------------------------------------------------------
# samplers
#
# Every sampler consumes only uniforms (and normals built from uniforms)
# off the supplied generator, so draws are reproducible per stream.


def _normal_draws(gen, n):
    # Box-Muller; 1-u keeps the log argument in (0, 1].
    u1 = 1.0 - gen.random(n)
    u2 = gen.random(n)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def _gamma_draws(gen, alpha):
    """Marsaglia-Tsang, vectorized rejection; alpha < 1 via the boost trick."""
    alpha = np.asarray(alpha, dtype=np.float64)
    n = alpha.shape[0]
    boost = alpha < 1.0
    a = np.where(boost, alpha + 1.0, alpha)
    d = a - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty(n)
    todo = np.ones(n, dtype=bool)
    while todo.any():
        idx = np.flatnonzero(todo)
        z = _normal_draws(gen, idx.size)
        v = (1.0 + c[idx] * z) ** 3
        u = gen.random(idx.size)
        ok_v = v > 0.0
        small = np.zeros(idx.size, dtype=bool)
        big = np.zeros(idx.size, dtype=bool)
        with np.errstate(invalid="ignore"):
            small = ok_v & (u < 1.0 - 0.0331 * z**4)
            big = ok_v & ~small & (np.log(u) < 0.5 * z * z + d[idx] * (1.0 - v + np.log(np.where(ok_v, v, 1.0))))
        accept = small | big
        out[idx[accept]] = d[idx[accept]] * v[accept]
        todo[idx[accept]] = False
    if boost.any():
        u = gen.random(n)  # one uniform per row keeps consumption shape-stable
        out = np.where(boost, out * u ** (1.0 / alpha), out)
    return out


def sample(family, params, gen, trials=None):
    """One response draw per row from the family at its parameters."""
    fam = families.get_family(family) if isinstance(family, str) else family
    p = np.asarray(params, dtype=np.float64)
    families._nll_domain_check(fam, p)
    n = p.shape[0]
    fid = fam.family_id

    if fid == "normal":
        mu, s2 = p[:, 0], p[:, 1]
        return mu + np.sqrt(s2) * _normal_draws(gen, n)

    if fid == "logistic":
        # the continuous logistic distribution (location mu, scale s)
        mu, s = p[:, 0], p[:, 1]
        u = np.maximum(gen.random(n), 2.2250738585072014e-308)
        return mu + s * np.log(u / (1.0 - u))

    if fid == "binomial":
        if trials is None:
            tr = np.ones(n)
        else:
            tr = np.broadcast_to(np.asarray(trials, dtype=np.float64), (n,)).astype(np.float64)
        if (tr < 1).any() or (tr != np.round(tr)).any():
            raise ContractError("trials must be positive integers")
        y = np.zeros(n)
        for k in range(int(tr.max())):
            y += (gen.random(n) < p[:, 0]) & (k < tr)
        return y

    if fid == "poisson":
        lam = p[:, 0]
        u = gen.random(n)
        pmf = np.exp(-lam)
        cdf = pmf.copy()
        y = np.zeros(n)
        active = cdf < u
        while active.any():
            y[active] += 1.0
            pmf[active] *= lam[active] / y[active]
            cdf[active] += pmf[active]
            active = cdf < u
        return y

    if fid == "inverse-gaussian":
        # Michael-Schucany-Haas; the second parameter plays the shape role.
        mu, lam = p[:, 0], p[:, 1]
        w = _normal_draws(gen, n) ** 2
        x = mu + mu * mu * w / (2.0 * lam) - (mu / (2.0 * lam)) * np.sqrt(
            4.0 * mu * lam * w + (mu * w) ** 2
        )
        u = gen.random(n)
        return np.where(u <= mu / (mu + x), x, mu * mu / x)

    if fid == "weibull":
        lam, beta = p[:, 0], p[:, 1]
        e = np.maximum(-np.log(1.0 - gen.random(n)), 2.2250738585072014e-308)
        return lam * e ** (1.0 / beta)

    if fid == "johnsons-su":
        # sinh transform of a normal draw (textbook construction)
        mu, sig, om, bs = (p[:, i] for i in range(4))
        z = _normal_draws(gen, n)
        return mu + sig * np.sinh((z - bs) / om)

    # inverse-gamma: reciprocal of a unit-scale gamma draw
    alpha, beta = p[:, 0], p[:, 1]
    g = np.maximum(_gamma_draws(gen, alpha), 2.2250738585072014e-308)
    return beta / g
