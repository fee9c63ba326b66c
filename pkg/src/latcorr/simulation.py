"""Monte Carlo studies of the direct estimator against aggregation baselines.

A study draws one ground truth (covariance, binding map, noise level) and
then, per replication, fresh Gaussian data from the latent factor model.
Every requested method is scored by its Frobenius-norm error against the
true correlation matrix and by its rejection rates for ``H0: |r| <= xi``,
split into type-I error (true ``|r| <= xi``) and power (true ``|r| > xi``).
"""

from __future__ import annotations

import configparser
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from . import aggregators
from .data import BindingMap, SampleMatrix, derive_unique_sets
from .direct import estimate_direct
from .errors import LatcorrError, NumericalError, ValidationError
from .inference import infer_all
from .moments import UniqueMoments
from .shrinkage import (
    DEFAULT_KAPPA_GRID,
    cross_validate_kappa,
    min_eigenvalue,
    rho_of_kappa,
    risk_components,
    shrink,
)

__all__ = [
    "ALL_METHODS",
    "GroundTruth",
    "StudyConfig",
    "SimReport",
    "fne",
    "generate_truth",
    "generate_data",
    "run_study",
]

ALL_METHODS = ("DIR", "DIR_SH") + aggregators.METHODS


def fne(r_hat, r) -> float:
    """Frobenius-norm error between two correlation matrices."""
    return float(np.linalg.norm(np.asarray(r_hat) - np.asarray(r), "fro"))


@dataclass(eq=False)
class GroundTruth:
    sigma: np.ndarray
    binding: BindingMap
    gamma_diag: np.ndarray
    unique_per_higher: int

    @property
    def p(self) -> int:
        return self.sigma.shape[0]

    @property
    def q(self) -> int:
        return self.binding.q

    @property
    def r(self) -> np.ndarray:
        d = 1.0 / np.sqrt(np.diag(self.sigma))
        r = self.sigma * d[:, None] * d[None, :]
        r[np.diag_indices_from(r)] = 1.0
        return r

    @property
    def c(self) -> np.ndarray:
        """Population covariance of the lower-level data."""
        a = self.binding.matrix.astype(float)
        return a @ self.sigma @ a.T + np.diag(self.gamma_diag)


def _draw_sigma(rng, p, density, lo, hi, diag_value):
    iu = np.triu_indices(p, 1)
    m = iu[0].size
    vals = np.zeros(m)
    nnz = int(round(density * m))
    if nnz:
        pos = rng.choice(m, size=nnz, replace=False)
        vals[pos] = rng.uniform(lo, hi, size=nnz)
    s = np.zeros((p, p))
    s[iu] = vals
    s = s + s.T
    np.fill_diagonal(s, diag_value)
    return s


def generate_truth(p: int, q: int, unique_per_higher: int = 5, density: float = 0.7,
                   corr_range=(0.2, 0.5), diag_value: float = 1.5, seed=None, noise: float = 0.3,
                   shared_parents=(2, 3), max_attempts: int = 100) -> GroundTruth:
    """Draw a sparse positive-definite covariance and a binding map.

    A fraction ``density`` of the off-diagonal pairs get a covariance drawn
    uniformly from ``corr_range``; the diagonal is constant.  Draws that are
    not positive definite are rejected and redrawn.  Rows beyond the
    ``unique_per_higher * p`` unique ones are shared, each by a number of
    distinct parents drawn uniformly from ``shared_parents``.
    """
    if not 0 <= density <= 1:
        raise ValueError("density must lie in [0, 1]")
    n_unique = unique_per_higher * p
    if q < n_unique:
        raise ValueError(f"q = {q} is smaller than unique_per_higher * p = {n_unique}")
    n_shared = q - n_unique
    if n_shared and min(shared_parents) > p:
        raise ValueError("not enough higher-level variables for shared rows")
    rng = np.random.default_rng(seed)
    lo, hi = corr_range
    for _ in range(max_attempts):
        sigma = _draw_sigma(rng, p, density, lo, hi, diag_value)
        if np.linalg.eigvalsh(sigma)[0] > 0:
            break
    else:
        raise NumericalError(f"no positive-definite covariance after {max_attempts} draws")

    a = np.zeros((q, p), dtype=np.int8)
    for l in range(p):
        a[l * unique_per_higher:(l + 1) * unique_per_higher, l] = 1
    choices = [k for k in shared_parents if k <= p]
    for j in range(n_unique, q):
        k = rng.choice(choices)
        a[j, rng.choice(p, size=k, replace=False)] = 1
    bmap = BindingMap(a, tuple(f"z{j + 1}" for j in range(q)), tuple(f"x{l + 1}" for l in range(p)))
    return GroundTruth(sigma, bmap, np.full(q, float(noise)), unique_per_higher)


def _sqrt_factor(sigma):
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(sigma)
        return v * np.sqrt(np.clip(w, 0, None))


def generate_data(truth: GroundTruth, n: int, noise: float | None = None, seed=None) -> SampleMatrix:
    """``n`` draws of ``z = A x + e`` with ``x ~ N(0, Sigma)`` and ``e ~ N(0, Gamma)``.

    ``noise`` overrides the truth's noise variances with a constant.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(seed)
    gamma = truth.gamma_diag if noise is None else np.full(truth.q, float(noise))
    x = rng.standard_normal((n, truth.p)) @ _sqrt_factor(truth.sigma).T
    e = rng.standard_normal((n, truth.q)) * np.sqrt(gamma)
    z = x @ truth.binding.matrix.T.astype(float) + e
    return SampleMatrix.from_array(z, truth.binding.lower_names, center=False)


@dataclass
class StudyConfig:
    p: int = 20
    q: int = 150
    n: int = 200
    reps: int = 100
    xi: float = 0.1
    alpha: float = 0.05
    density: float = 0.7
    corr_lo: float = 0.2
    corr_hi: float = 0.5
    diag: float = 1.5
    noise: float = 0.3
    unique_per_higher: int = 5
    methods: tuple = ALL_METHODS
    seed: int = 0
    kappa: object = "cv"
    cv_grid: tuple = DEFAULT_KAPPA_GRID
    cv_splits: int = 20
    split_ratio: float = 0.5
    shared_parents: tuple = (2, 3)
    threads: int = 1

    def __post_init__(self):
        self.methods = tuple(m.upper().replace("-", "_") for m in self.methods)
        unknown = [m for m in self.methods if m not in ALL_METHODS]
        if unknown:
            raise ValidationError(f"unknown method(s): {', '.join(unknown)}")
        if self.xi < 0:
            raise ValidationError("xi must be >= 0")
        if not 0 < self.alpha < 1:
            raise ValidationError("alpha must lie in (0, 1)")
        if self.kappa != "cv":
            self.kappa = float(self.kappa)

    @classmethod
    def from_text(cls, text: str) -> "StudyConfig":
        """Parse ``key = value`` lines (``#`` comments allowed)."""
        cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
        try:
            cp.read_string("[study]\n" + text)
        except configparser.Error as exc:
            raise ValidationError(f"bad study config: {exc}") from exc
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for key, raw in cp["study"].items():
            key = key.replace("-", "_")
            if key not in types:
                raise ValidationError(f"unknown study config key {key!r}")
            try:
                kw[key] = _coerce(key, raw)
            except ValueError as exc:
                raise ValidationError(f"config key {key!r}: cannot parse {raw.strip()!r}") from exc
        return cls(**kw)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _coerce(key, raw):
    raw = raw.strip()
    if key in ("p", "q", "n", "reps", "unique_per_higher", "seed", "cv_splits", "threads"):
        return int(raw)
    if key == "methods":
        return tuple(m.strip() for m in raw.replace(";", ",").split(",") if m.strip())
    if key in ("cv_grid", "shared_parents"):
        conv = float if key == "cv_grid" else int
        return tuple(conv(v) for v in raw.replace(";", ",").split(",") if v.strip())
    if key == "kappa":
        return raw if raw == "cv" else float(raw)
    return float(raw)


@dataclass
class SimReport:
    """Per-replication results of a study.

    ``fne[m]`` is an array over replications (NaN where method ``m`` failed).
    ``rejections[m]`` is a ``(reps, 4)`` integer array of null rejections,
    null tests, alternative rejections and alternative tests.
    """

    config: StudyConfig
    truth: GroundTruth
    fne: dict
    rejections: dict
    errors: list = field(default_factory=list)
    pd_audit: list = field(default_factory=list)
    kappas: np.ndarray | None = None

    def type1_rate(self, method) -> float:
        c = self.rejections[method]
        return float(c[:, 0].sum() / c[:, 1].sum()) if c[:, 1].sum() else float("nan")

    def power(self, method) -> float:
        c = self.rejections[method]
        return float(c[:, 2].sum() / c[:, 3].sum()) if c[:, 3].sum() else float("nan")

    def median_fne(self, method) -> float:
        v = self.fne[method]
        v = v[~np.isnan(v)]
        return float(np.median(v)) if v.size else float("nan")

    def summary(self) -> dict:
        out = {}
        for m in self.config.methods:
            entry = {"median_fne": self.median_fne(m), "failures": int(np.isnan(self.fne[m]).sum())}
            if m in self.rejections:
                entry["type1"] = self.type1_rate(m)
                entry["power"] = self.power(m)
            out[m] = entry
        return out

    def rows(self):
        for m in self.config.methods:
            for b in range(self.config.reps):
                row = {"rep": b, "method": m, "fne": float(self.fne[m][b])}
                if m in self.rejections:
                    c = self.rejections[m][b]
                    row.update(null_rejections=int(c[0]), null_tests=int(c[1]),
                               alt_rejections=int(c[2]), alt_tests=int(c[3]))
                yield row


def _counts(reject, valid, null):
    """Rejection counts over null and alternative pairs with a valid test."""
    return np.array([
        int(np.sum(reject & valid & null)),
        int(np.sum(valid & null)),
        int(np.sum(reject & valid & ~null)),
        int(np.sum(valid & ~null)),
    ])


def _child(seq):
    # fixed derivation; SeedSequence.spawn would depend on earlier spawn calls
    return np.random.SeedSequence(seq.entropy, spawn_key=tuple(seq.spawn_key) + (0,))


def _replicate(cfg: StudyConfig, truth: GroundTruth, sets, null, seed_seq):
    z = generate_data(truth, cfg.n, seed=seed_seq)
    r_true = truth.r
    p = truth.p
    iu = np.triu_indices(p, 1)
    fnes, counts, errors, audit = {}, {}, [], None
    kappa_used = np.nan
    methods = cfg.methods

    cov = None
    if "DIR" in methods or "DIR_SH" in methods:
        cov = estimate_direct(z, sets)
    if "DIR" in methods:
        if cov.diag_valid.all():
            fnes["DIR"] = fne(cov.r_hat, r_true)
        else:
            fnes["DIR"] = np.nan
            errors.append(("DIR", "non-positive variance estimate"))
        res = infer_all(z, sets, cov, cfg.xi)
        reject = np.zeros(iu[0].size, bool)
        valid = np.zeros(iu[0].size, bool)
        pos = {pair: i for i, pair in enumerate(zip(*iu))}
        for rec in res.records:
            i = pos[(rec.l, rec.k)]
            valid[i] = True
            reject[i] = rec.p_value < cfg.alpha
        counts["DIR"] = _counts(reject, valid, null)
    if "DIR_SH" in methods:
        try:
            if not cov.diag_valid.all():
                raise NumericalError("non-positive variance estimate")
            kappa = cfg.kappa
            if kappa == "cv":
                kappa = cross_validate_kappa(z, sets, cfg.cv_grid, cfg.cv_splits, cfg.split_ratio,
                                             seed=_child(seed_seq)).chosen_kappa
            rc = risk_components(z, sets, cov, moments=UniqueMoments(z, sets))
            lam = min_eigenvalue(cov.r_hat)
            rho, branch = rho_of_kappa(rc.alpha2, rc.beta2, rc.gamma2, lam, kappa)
            _, r_sh = shrink(cov, rho)
            fnes["DIR_SH"] = fne(r_sh, r_true)
            kappa_used = kappa
            grid_lams = []
            for kg in cfg.cv_grid:
                rho_g, _ = rho_of_kappa(rc.alpha2, rc.beta2, rc.gamma2, lam, kg)
                grid_lams.append(min_eigenvalue(shrink(cov, rho_g)[1]))
            audit = {"lambda_min_dir": lam, "lambda_min_sh": min_eigenvalue(r_sh), "rho": rho,
                     "branch": branch, "kappa": kappa, "grid_lambda_min_sh": grid_lams,
                     "sigma_sh_sqerr": float(np.sum((shrink(cov, rho)[0] - truth.sigma) ** 2)),
                     "sigma_dir_sqerr": float(np.sum((cov.sigma_hat - truth.sigma) ** 2))}
        except LatcorrError as exc:
            fnes["DIR_SH"] = np.nan
            errors.append(("DIR_SH", str(exc)))

    for m in methods:
        if m in ("DIR", "DIR_SH"):
            continue
        agg = aggregators.aggregate(z, truth.binding, sets, m)
        if agg.skipped:
            fnes[m] = np.nan
            errors.append((m, f"{len(agg.skipped)} higher-level variable(s) skipped"))
            counts[m] = np.zeros(4, dtype=int)
            continue
        r, ok = aggregators.baseline_correlation(agg)
        fnes[m] = fne(r, r_true) if ok.all() else np.nan
        rv = r[iu]
        valid = ~np.isnan(rv)
        pv = np.ones_like(rv)
        pv[valid] = aggregators.fisher_test(rv[valid], cfg.n, cfg.xi)
        counts[m] = _counts(pv < cfg.alpha, valid, null)
    return fnes, counts, errors, audit, kappa_used


def run_study(config: StudyConfig, truth: GroundTruth | None = None) -> SimReport:
    """Run ``config.reps`` replications against one fixed ground truth.

    Seeds: child 0 of ``SeedSequence(config.seed)`` draws the truth and child
    ``b + 1`` drives replication ``b``, so results do not depend on the
    number of threads.
    """
    cfg = config
    master = np.random.SeedSequence(cfg.seed)
    children = master.spawn(cfg.reps + 1)
    if truth is None:
        truth = generate_truth(
            cfg.p, cfg.q, cfg.unique_per_higher, cfg.density, (cfg.corr_lo, cfg.corr_hi), cfg.diag,
            seed=children[0], noise=cfg.noise, shared_parents=cfg.shared_parents,
        )
    sets = derive_unique_sets(truth.binding)
    iu = np.triu_indices(truth.p, 1)
    null = np.abs(truth.r[iu]) <= cfg.xi

    def one(b):
        return _replicate(cfg, truth, sets, null, children[b + 1])

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if cfg.threads > 1:
            with ThreadPoolExecutor(cfg.threads) as ex:
                results = list(ex.map(one, range(cfg.reps)))
        else:
            results = [one(b) for b in range(cfg.reps)]

    fnes = {m: np.array([res[0].get(m, np.nan) for res in results]) for m in cfg.methods}
    rejections = {
        m: np.array([res[1][m] for res in results]).reshape(len(results), 4)
        for m in cfg.methods if m != "DIR_SH"
    }
    errors = [(b, m, msg) for b, res in enumerate(results) for m, msg in res[2]]
    audit = [res[3] for res in results]
    kappas = np.array([res[4] for res in results])
    return SimReport(cfg, truth, fnes, rejections, errors, audit, kappas)
