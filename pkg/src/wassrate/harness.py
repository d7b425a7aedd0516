"""Monte Carlo convergence experiments, rate fits and canonical reproductions."""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from . import __version__, errors
from .bounds import (
    hard_instance_family,
    multinomial_l1_bound,
    multinomial_minimax_lower,
    theorem1_bound,
    theorem1_limit_form,
    theorem2_bound,
    theorem3_lower_bound,
)
from .config import ExperimentConfig, measure_from_spec, parse_float_list, space_for
from .estimators import GENERATOR_ID, empirical, rng_for, sample
from .metric import DiscreteMeasure, FiniteMetricSpace, metric_moment
from .partitions import covering_number, packing_radii
from .reports import BoundReport
from .transport import wasserstein_exact, wasserstein_uniform_1d

CSV_COLUMNS = ("n", "trial_count", "mean_wrr", "stderr", "bound_upper", "bound_lower", "wall_ms")


# --------------------------------------------------------------------------
# rate fitting


@dataclass(frozen=True)
class RateFitResult:
    slope: float
    intercept: float
    r_squared: float
    points: Tuple[Tuple[float, float, float], ...]


def fit_rate(points: Sequence[Sequence[float]]) -> RateFitResult:
    """Least-squares line through ``(log n, log risk)``.

    Each point is ``(n, risk)`` or ``(n, risk, stderr)``.
    """
    pts = [tuple(float(v) for v in p) + ((math.nan,) if len(p) == 2 else ()) for p in points]
    if len(pts) < 2:
        raise errors.ValidationError("need at least two points to fit a rate")
    n = np.array([p[0] for p in pts])
    risk = np.array([p[1] for p in pts])
    if (risk <= 0).any() or (n <= 0).any():
        raise errors.NonpositiveRisk("rate fitting needs positive n and positive risks")
    x, y = np.log(n), np.log(risk)
    if np.ptp(y) == 0:
        return RateFitResult(0.0, float(y[0]), 1.0, tuple(pts))
    fit = stats.linregress(x, y)
    r2 = min(1.0, max(0.0, float(fit.rvalue) ** 2))
    return RateFitResult(float(fit.slope), float(fit.intercept), r2, tuple(pts))


# --------------------------------------------------------------------------
# bound columns


def _cube_covering(dim: int, eps: float) -> int:
    """Covering count of [0, 1]^dim by sub-cubes of diameter <= eps."""
    if eps <= 0:
        raise errors.ValidationError("continuous covering needs eps > 0")
    return int(math.ceil(math.sqrt(dim) / eps - 1e-12)) ** dim


class _BoundEvaluator:
    """Per-row upper/lower bound columns from ``config.bound_specs``.

    n-independent inputs (covering counts, packing radii, moments) are
    computed once.
    """

    def __init__(self, config: ExperimentConfig, space: Optional[FiniteMetricSpace], P: Optional[DiscreteMeasure]):
        self.config = config
        self.space = space
        self.P = P
        self.r = config.r
        self._cache: Dict[str, object] = {}
        n_max = max(config.n_grid)
        self.specs = list(config.bound_specs)
        self.n_max = n_max

    # upper bounds -----------------------------------------------------
    def _thm1(self, spec, n) -> BoundReport:
        mode = spec.get("mode", "limit" if self.space is not None else "dyadic")
        if mode == "limit":
            if self.space is None:
                raise errors.ConfigError("limit-form bound needs a finite space")
            return theorem1_limit_form(self.space, n, self.r)
        if mode != "dyadic":
            raise errors.ConfigError(f"unknown thm1 mode {mode!r}")
        levels = int(spec.get("levels", 12))
        key = "thm1-dyadic"
        if key not in self._cache:
            if self.space is None:
                dim = int(spec.get("dim", 1))
                diam = math.sqrt(dim)
                eps = [diam * 2.0**-k for k in range(1, levels + 1)]
                counts = [_cube_covering(dim, e) for e in eps]
            else:
                diam = self.space.diameter()
                eps = [diam * 2.0**-k for k in range(1, levels + 1)]
                cmode = spec.get("covering_mode", "exact" if self.space.size <= 12 else "greedy")
                counts = [covering_number(self.space, e, cmode).upper for e in eps]
            self._cache[key] = (diam, eps, counts)
        diam, eps, counts = self._cache[key]
        # the bound holds for every depth K; report the smallest
        reps = [theorem1_bound(eps[:K], counts[:K], n, self.r, diam) for K in range(1, len(eps) + 1)]
        best = min(reps, key=lambda rep: rep.value)
        return best

    def _thm2(self, spec, n) -> BoundReport:
        if self.space is None or self.P is None:
            raise errors.ConfigError("thm2 column needs a finite space")
        if "thm2" not in self._cache:
            ell = float(spec.get("ell", 4))
            base = int(spec.get("base_point", 0))
            dmax = float(self.space.dist[base].max())
            if "w" in spec:
                w = parse_float_list(spec["w"])
            else:
                w = [0.0, 1.0]
                while w[-1] <= dmax:
                    w.append(2 * w[-1])
            if w[-1] <= dmax and spec.get("tail", "bounded") == "bounded":
                raise errors.ConfigError(f"bounded tail needs w_K > {dmax} (max distance from the base point)")
            eps = parse_float_list(spec["eps"]) if "eps" in spec else []
            eps0 = float(spec.get("eps0", 0.0))
            covers = None
            if eps:
                d = self.space.dist[base]
                covers = []
                for k in range(len(w) - 1):
                    idx = np.flatnonzero((d >= w[k]) & (d < w[k + 1]))
                    row = []
                    for e in eps:
                        if idx.size == 0:
                            row.append(0)
                        elif e == 0:
                            row.append(int(idx.size))
                        else:
                            from .metric import validate_space

                            sub = validate_space(self.space.dist[np.ix_(idx, idx)], check_triangle=False)
                            mode = "exact" if sub.size <= 12 else "greedy"
                            row.append(covering_number(sub, e, mode).upper)
                    covers.append(row)
            m = metric_moment(self.P, ell, base).value
            self._cache["thm2"] = dict(
                w=w, eps=eps, covers=covers, moment=max(1.0, m), ell=ell, eps0=eps0,
                tail=spec.get("tail", "bounded"), variant=spec.get("variant", "statement"),
            )
        c = self._cache["thm2"]
        return theorem2_bound(
            c["w"], c["eps"], c["covers"], c["moment"], c["ell"], n, self.r,
            eps0=c["eps0"], tail=c["tail"], variant=c["variant"],
        )

    # lower bound ---------------------------------------------------------
    def _thm3(self, spec, n) -> BoundReport:
        kcap = int(spec.get("kmax", 4096))
        if "thm3" not in self._cache:
            if self.space is None:
                dim = int(spec.get("dim", 1))
                kmax = min(32 * self.n_max, kcap)
                radii = {}
                for k in range(2, kmax + 1):
                    side = max(2, math.ceil(k ** (1.0 / dim) - 1e-12))
                    radii[k] = 1.0 / (side - 1)  # lattice with endpoints; attained in [0,1]^dim
            else:
                mode = spec.get("mode", "exact" if self.space.size <= 20 else "greedy")
                kmax = min(32 * self.n_max, self.space.size, kcap)
                radii = packing_radii(self.space, kmax, mode)
            self._cache["thm3"] = radii
        radii = self._cache["thm3"]
        return theorem3_lower_bound({k: v for k, v in radii.items() if k <= 32 * n}, n, self.r)

    def evaluate(self, n: int) -> Tuple[float, float, Dict[str, float]]:
        upper, lower = math.nan, math.nan
        detail = {}
        for spec in self.specs:
            kind = spec["kind"]
            if kind == "thm1":
                rep = self._thm1(spec, n)
            elif kind == "thm2":
                rep = self._thm2(spec, n)
            elif kind == "thm3":
                rep = self._thm3(spec, n)
            else:
                raise errors.ConfigError(f"unknown bound kind {kind!r}")
            detail[kind] = rep.value
            if kind == "thm3":
                lower = rep.value if math.isnan(lower) else max(lower, rep.value)
            else:
                upper = rep.value if math.isnan(upper) else min(upper, rep.value)
        return upper, lower, detail


# --------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: List[dict]
    manifest: dict
    status: str = "ok"
    row_details: List[dict] = field(default_factory=list)

    def fit(self) -> RateFitResult:
        return fit_rate([(r["n"], r["mean_wrr"], r["stderr"]) for r in self.rows])


def _trial_risks(config, space, P, n) -> np.ndarray:
    vals = np.empty(config.trials)
    for t in range(config.trials):
        if config.continuous:
            x = rng_for(config.seed, n, t).random(n)
            vals[t] = wasserstein_uniform_1d(x, config.r)
        else:
            Pn = empirical(sample(P, n, config.seed, t))
            vals[t] = wasserstein_exact(P, Pn, config.r)[1].cost_r
    return vals


def _manifest(config: ExperimentConfig, status: str, extra=None) -> dict:
    out = {
        "config": config.to_dict(),
        "seed": config.seed,
        "generator_id": GENERATOR_ID,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "status": status,
    }
    if extra:
        out.update(extra)
    return out


def write_outputs(result: ExperimentResult, csv_path) -> Tuple[Path, Path]:
    """CSV of rows plus a JSON manifest next to it (same stem, ``.json``)."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in result.rows:
            w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    man_path = csv_path.with_suffix(".json")
    man = dict(result.manifest)
    man["status"] = result.status
    man["rows"] = result.row_details
    man_path.write_text(json.dumps(man, indent=2, sort_keys=True, default=str) + "\n")
    return csv_path, man_path


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def run_convergence_experiment(
    config: ExperimentConfig,
    write: bool = True,
    progress: Optional[Callable[[dict], None]] = None,
) -> ExperimentResult:
    """Mean ``W_r^r(P, P_n)`` over independent trials for every ``n`` in the grid.

    Rows are flushed to ``config.output_path`` (when set) even if a later row
    fails; the manifest then carries a ``failed: ...`` status.
    """
    space = space_for(config)
    fixed_P = None
    if space is not None and not config.distribution_spec.startswith("hard-instance"):
        fixed_P = measure_from_spec(config.distribution_spec, space)
    evaluator = _BoundEvaluator(config, space, fixed_P)
    result = ExperimentResult(config, [], _manifest(config, "running"))
    try:
        for n in config.n_grid:
            t0 = time.perf_counter()
            P = fixed_P if fixed_P is not None or space is None else measure_from_spec(config.distribution_spec, space, n)
            if P is not fixed_P:
                evaluator = _BoundEvaluator(config, space, P)
            vals = _trial_risks(config, space, P, n)
            upper, lower, detail = evaluator.evaluate(n)
            se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
            row = {
                "n": n,
                "trial_count": config.trials,
                "mean_wrr": float(vals.mean()),
                "stderr": se,
                "bound_upper": float(upper),
                "bound_lower": float(lower),
                "wall_ms": round((time.perf_counter() - t0) * 1000.0, 3),
            }
            result.rows.append(row)
            result.row_details.append({"n": n, **detail})
            if progress is not None:
                progress(row)
    except Exception as exc:
        result.status = f"failed: {type(exc).__name__}: {exc}"
        if write and config.output_path:
            write_outputs(result, config.output_path)
        raise
    result.status = "ok"
    if write and config.output_path:
        write_outputs(result, config.output_path)
    return result


# --------------------------------------------------------------------------
# canonical reproductions


SLOPE_HALF = (-0.55, -0.45)


def cube_slope_window(D: int, r: float) -> Optional[Tuple[float, float]]:
    """Accepted fitted-slope window for the unit cube; ``None`` at the 2r = D boundary."""
    if 2 * r > D:
        return SLOPE_HALF
    if 2 * r == D:
        return None
    target = -r / D
    return (target - 0.2 / 3, target + 0.19 / 3)


@dataclass
class ReproduceReport:
    which: str
    result: ExperimentResult
    fit: RateFitResult
    bound_fit: Optional[RateFitResult]
    checks: Dict[str, bool]

    @property
    def verdict(self) -> bool:
        return all(self.checks.values())

    def summary(self) -> dict:
        return {
            "example": self.which,
            "slope": self.fit.slope,
            "r_squared": self.fit.r_squared,
            "bound_slope": None if self.bound_fit is None else self.bound_fit.slope,
            "checks": self.checks,
            "verdict": "pass" if self.verdict else "fail",
            "rows": self.result.rows,
        }


def canonical_config(which: str, overrides: Optional[Dict[str, str]] = None) -> ExperimentConfig:
    """Default experiment for ``finite``, ``cube`` or ``grid``, with key=value overrides."""
    ov = dict(overrides or {})

    def take(key, default, cast=str):
        return cast(ov.pop(key)) if key in ov else default

    from .config import parse_int_list

    r = take("r", 1.0, float)
    seed = take("seed", 0, int)
    if which == "finite":
        m = take("m", 16, int)
        delta = take("delta", 1.0, float)
        cfg = dict(
            space_spec=f"discrete({m}, {delta!r})", distribution_spec="uniform", r=r,
            n_grid=[2**k for k in range(4, 13)], trials=200, seed=seed,
            bound_specs=[{"kind": "thm1", "mode": "limit"}, {"kind": "thm3"}],
        )
    elif which == "cube":
        D = take("D", 1, int)
        if D == 1 and "k" not in ov:
            cfg = dict(
                space_spec="interval", distribution_spec="continuous-uniform", r=r,
                n_grid=[2**k for k in range(4, 13)], trials=200, seed=seed,
                bound_specs=[{"kind": "thm1", "mode": "dyadic", "dim": "1"}, {"kind": "thm3", "dim": "1"}],
            )
        else:
            k = take("k", 16, int)
            cfg = dict(
                space_spec=f"cube-grid({D}, {k})", distribution_spec="uniform", r=r,
                n_grid=[2**j for j in range(6, 15)], trials=50, seed=seed,
                bound_specs=[{"kind": "thm1", "mode": "dyadic"}, {"kind": "thm3", "mode": "greedy"}],
            )
    elif which == "grid":
        D = take("D", 2, int)
        side = take("side", 8, int)
        ell = take("ell", 4.0, float)
        base = take("base_point", None, int)
        if base is None:
            base = int(np.ravel_multi_index([side // 2] * D, [side] * D))
        cfg = dict(
            space_spec=f"grid({D}, {side})", distribution_spec="uniform", r=r,
            n_grid=[2**j for j in range(6, 13)], trials=100, seed=seed,
            bound_specs=[
                {"kind": "thm2", "ell": str(ell), "base_point": str(base), "eps0": "0", "tail": "bounded"},
                {"kind": "thm3"},
            ],
        )
    else:
        raise errors.UnknownExample(f"unknown example {which!r}; choose finite, cube or grid")
    if "trials" in ov:
        cfg["trials"] = int(ov.pop("trials"))
    if "n_grid" in ov:
        cfg["n_grid"] = parse_int_list(ov.pop("n_grid"))
    if "output" in ov:
        cfg["output_path"] = ov.pop("output")
    if ov:
        raise errors.ConfigError(f"unknown overrides for {which!r}: {sorted(ov)}")
    return ExperimentConfig(**cfg)


def reproduce_example(which: str, overrides: Optional[Dict[str, str]] = None, write: bool = True) -> ReproduceReport:
    """Run a canonical example and judge it against its rate and envelope checks."""
    cfg = canonical_config(which, overrides)
    res = run_convergence_experiment(cfg, write=write)
    fit = res.fit()
    rows = res.rows
    checks: Dict[str, bool] = {}
    uppers = [r["bound_upper"] for r in rows]
    lowers = [r["bound_lower"] for r in rows]
    checks["upper envelope"] = all(r["mean_wrr"] - 2 * r["stderr"] <= u for r, u in zip(rows, uppers))
    checks["lower envelope"] = all(lo <= r["mean_wrr"] + 2 * r["stderr"] for r, lo in zip(rows, lowers))
    bound_fit = None
    if which == "finite":
        window = SLOPE_HALF
    elif which == "cube":
        D = 1 if cfg.continuous else int(cfg.space_spec.split("(")[1].split(",")[0])
        window = cube_slope_window(D, cfg.r)
    else:
        window = None
        bound_fit = fit_rate([(r["n"], u) for r, u in zip(rows, uppers)])
        checks["bound decays like n^-1/2"] = SLOPE_HALF[0] <= bound_fit.slope <= SLOPE_HALF[1]
    if window is not None:
        checks[f"slope in [{window[0]:.3f}, {window[1]:.3f}]"] = window[0] <= fit.slope <= window[1]
    return ReproduceReport(which, res, fit, bound_fit, checks)


# --------------------------------------------------------------------------
# multinomial


def multinomial_risk_experiment(
    k: int,
    n_grid: Sequence[int],
    trials: int,
    seed: int = 0,
    hard_members: int = 8,
) -> List[dict]:
    """Monte Carlo ``E ||p_hat - p||_1`` for the empirical frequency estimator.

    Rows report uniform ``p`` and the worst of the first ``hard_members``
    members of the hard family, next to the closed-form upper (``sqrt((k-1)/n)``)
    and lower (minimax) values.  ``ok`` flags ``lower <= mean`` and
    ``mean - 2 SE <= upper`` for uniform ``p``.
    """
    if k < 1:
        raise errors.ValidationError("k must be >= 1")
    if trials < 2:
        raise errors.ValidationError("need at least two trials")
    rows = []
    for n in n_grid:
        p = np.full(k, 1.0 / k)
        rng = rng_for(seed, n, k)
        l1 = np.abs(rng.multinomial(n, p, size=trials) / n - p).sum(axis=1)
        mean, se = float(l1.mean()), float(l1.std(ddof=1) / math.sqrt(trials))
        upper = multinomial_l1_bound(k, n)
        if k >= 2 and k <= 32 * n:
            lower = multinomial_minimax_lower(k, n)
            fam = hard_instance_family(k, n)
            worst = 0.0
            for i, q in enumerate(fam.members[:hard_members]):
                hl1 = np.abs(rng_for(seed, n, k, i + 1).multinomial(n, q, size=trials) / n - q).sum(axis=1)
                worst = max(worst, float(hl1.mean()))
        else:
            lower, worst = 0.0, 0.0
        rows.append({
            "k": k, "n": int(n), "trials": trials, "mean_l1": mean, "stderr": se,
            "hard_worst_mean_l1": worst, "upper": upper, "lower": lower,
            "ok": bool(lower <= mean and mean - 2 * se <= upper),
        })
    return rows
