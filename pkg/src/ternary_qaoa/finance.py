"""Price data ingestion and portfolio instance construction.

Daily simple returns are computed on the dates common to every series;
expected returns are annualized by geometric compounding over 252 trading
days and covariances by scaling the unbiased daily estimate by 252.
Synthetic instances with the same magnitudes are available for batch
experiments where no price data is wanted.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

TRADING_DAYS = 252

SYMMETRY_TOL = 1e-12
PSD_TOL = -1e-10


class DataError(Exception):
    """Raised on malformed or insufficient market data."""


class ParameterError(ValueError):
    """Raised on out-of-range instance parameters."""


@dataclass(frozen=True)
class PriceSeries:
    """One asset's adjusted closing prices, strictly positive, on strictly
    increasing dates (ISO-8601 strings)."""

    asset_label: str
    dates: tuple[str, ...]
    prices: np.ndarray

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        object.__setattr__(self, "prices", prices)
        if len(self.dates) != prices.size:
            raise DataError(f"{self.asset_label}: {len(self.dates)} dates for {prices.size} prices")
        if prices.size < 2:
            raise DataError(f"{self.asset_label}: need at least 2 prices")
        if not np.all(prices > 0):
            raise DataError(f"{self.asset_label}: non-positive price")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise DataError(f"{self.asset_label}: dates not strictly increasing")


@dataclass(frozen=True)
class ReturnMatrix:
    """T x N daily simple returns, rows ordered by date."""

    returns: np.ndarray
    asset_labels: tuple[str, ...]

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        object.__setattr__(self, "returns", r)
        if r.ndim != 2 or r.shape[1] != len(self.asset_labels):
            raise DataError("return matrix shape does not match labels")
        if not np.all(r > -1):
            raise DataError("return <= -1 encountered")


@dataclass(frozen=True)
class PortfolioInstance:
    """N assets with annualized return vector mu, annualized covariance
    sigma, risk-aversion blend q, and an integer position budget B."""

    n_assets: int
    budget: int
    q: float
    mu: np.ndarray
    sigma: np.ndarray
    labels: tuple[str, ...]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        n = self.n_assets
        if n < 1:
            raise ParameterError("need at least one asset")
        if mu.shape != (n,) or sigma.shape != (n, n):
            raise ParameterError(f"mu/sigma shapes {mu.shape}/{sigma.shape} do not match N={n}")
        if abs(self.budget) > n:
            raise ParameterError(f"|budget| = {abs(self.budget)} exceeds N = {n}")
        if not 0.0 <= self.q <= 1.0:
            raise ParameterError(f"q must lie in [0, 1], got {self.q}")
        if len(self.labels) != n:
            raise ParameterError("label count does not match N")
        asym = np.max(np.abs(sigma - sigma.T)) if n else 0.0
        if asym > SYMMETRY_TOL:
            raise ParameterError(f"sigma asymmetric by {asym:.3e}")
        sigma = (sigma + sigma.T) / 2.0
        lam_min = float(np.linalg.eigvalsh(sigma)[0])
        if lam_min < PSD_TOL:
            raise ParameterError(f"sigma has eigenvalue {lam_min:.3e} below tolerance")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "labels", tuple(self.labels))


def load_price_csv(path: str) -> list[PriceSeries]:
    """Read `date,<label>,...` rows into one PriceSeries per column.  Empty
    cells are missing data points and are skipped per series; rows are sorted
    by date before building the series."""
    with open(path, newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 2 or header[0].strip().lower() != "date":
            raise DataError(f"{path}: header must be 'date,<label>,...'")
        labels = [h.strip() for h in header[1:]]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            rows.append([c.strip() for c in row])
    rows.sort(key=lambda r: r[0])
    series = []
    for k, label in enumerate(labels):
        dates, prices = [], []
        for row in rows:
            cell = row[k + 1]
            if not cell:
                continue
            try:
                price = float(cell)
            except ValueError:
                raise DataError(f"{path}: bad price {cell!r} for {label}") from None
            dates.append(row[0])
            prices.append(price)
        series.append(PriceSeries(label, tuple(dates), np.array(prices)))
    return series


def compute_daily_returns(series_set: list[PriceSeries]) -> ReturnMatrix:
    """Simple returns p[t+1]/p[t] - 1 on the date set common to all series."""
    if not series_set:
        raise DataError("no price series given")
    common = set(series_set[0].dates)
    for s in series_set[1:]:
        common &= set(s.dates)
    if len(common) < 2:
        raise DataError(f"only {len(common)} common dates, need at least 2")
    ordered = sorted(common)
    cols = []
    for s in series_set:
        lookup = dict(zip(s.dates, s.prices))
        p = np.array([lookup[d] for d in ordered])
        cols.append(p[1:] / p[:-1] - 1.0)
    return ReturnMatrix(np.column_stack(cols), tuple(s.asset_label for s in series_set))


def estimate_mu(returns: ReturnMatrix) -> np.ndarray:
    """Annualized expected returns [prod_t (1+r)]^(252/T) - 1."""
    r = returns.returns
    t = r.shape[0]
    if t < 1:
        raise DataError("need at least one return row")
    growth = np.prod(1.0 + r, axis=0)
    # entries > -1 guaranteed by ReturnMatrix, so growth > 0
    return growth ** (TRADING_DAYS / t) - 1.0


def estimate_sigma(returns: ReturnMatrix) -> np.ndarray:
    """Annualized covariance: 252 times the unbiased daily sample covariance."""
    r = returns.returns
    if r.shape[0] < 2:
        raise DataError("need at least two return rows for covariance")
    centered = r - r.mean(axis=0)
    daily = centered.T @ centered / (r.shape[0] - 1)
    return TRADING_DAYS * daily


def build_instance(mu: np.ndarray, sigma: np.ndarray, q: float, budget: int,
                   labels: tuple[str, ...] | None = None,
                   provenance: dict | None = None) -> PortfolioInstance:
    mu = np.asarray(mu, dtype=float)
    n = mu.size
    if labels is None:
        labels = tuple(f"A{i + 1}" for i in range(n))
    return PortfolioInstance(
        n_assets=n, budget=int(budget), q=float(q), mu=mu,
        sigma=np.asarray(sigma, dtype=float), labels=tuple(labels),
        provenance=provenance or {},
    )


def random_instance(n_assets: int, budget: int, q: float = 1 / 3,
                    seed: int | None = None) -> PortfolioInstance:
    """Synthetic instance with realistic annualized magnitudes: sigma from a
    Gram matrix rescaled to diagonal targets in [0.01, 0.2], mu uniform in
    [-0.1, 0.4].  Deterministic per seed."""
    if abs(budget) > n_assets:
        raise ParameterError(f"|budget| = {abs(budget)} exceeds N = {n_assets}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n_assets, n_assets))
    gram = g @ g.T
    targets = rng.uniform(0.01, 0.2, size=n_assets)
    d = np.sqrt(targets / np.diag(gram))
    sigma = gram * np.outer(d, d)
    mu = rng.uniform(-0.1, 0.4, size=n_assets)
    return build_instance(
        mu, sigma, q, budget,
        provenance={"source": "random", "generator": "gram-rescaled-pcg64", "seed": seed},
    )


def instance_to_json(instance: PortfolioInstance) -> str:
    return json.dumps(
        {
            "n_assets": instance.n_assets,
            "budget": instance.budget,
            "q": instance.q,
            "mu": instance.mu.tolist(),
            "sigma": instance.sigma.tolist(),
            "labels": list(instance.labels),
            "provenance": instance.provenance,
        },
        indent=2,
    )


def instance_from_json(text: str) -> PortfolioInstance:
    raw = json.loads(text)
    try:
        inst = PortfolioInstance(
            n_assets=int(raw["n_assets"]),
            budget=int(raw["budget"]),
            q=float(raw["q"]),
            mu=np.array(raw["mu"], dtype=float),
            sigma=np.array(raw["sigma"], dtype=float),
            labels=tuple(raw.get("labels") or ()) or tuple(f"A{i+1}" for i in range(int(raw["n_assets"]))),
            provenance=raw.get("provenance", {}),
        )
    except KeyError as exc:
        raise DataError(f"instance JSON missing key {exc}") from None
    return inst


def estimate_instance_from_csv(path: str, q: float, budget: int) -> PortfolioInstance:
    """Full pipeline: CSV -> aligned returns -> annualized mu/sigma -> instance."""
    series = load_price_csv(path)
    returns = compute_daily_returns(series)
    mu = estimate_mu(returns)
    sigma = estimate_sigma(returns)
    n_dropped = max(len(s.dates) for s in series) - (returns.returns.shape[0] + 1)
    return build_instance(
        mu, sigma, q, budget, labels=returns.asset_labels,
        provenance={
            "source": "prices-csv",
            "path": path,
            "n_return_rows": int(returns.returns.shape[0]),
            "n_dates_dropped_vs_longest": int(n_dropped),
            "annualization_days": TRADING_DAYS,
        },
    )
