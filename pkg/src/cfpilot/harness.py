"""Monte-Carlo drop simulation, aggregation and result export."""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import scenario as sc
from .channel import dump_channels_csv, estimation_stats, large_scale
from .dcp import FeatureSource, build_diversity
from .exhaustive import exhaustive_dcp, exhaustive_sum_rate
from .rates import dl_power_alloc, dl_rate, maxmin_ul_power, normalized_snrs, throughput, ul_rate
from .solvers import (ClusterMode, ImsParams, cluster_bounds, greedy_assignment, ims,
                      random_assignment, repulsive_assignment, unique_pilots)

log = logging.getLogger(__name__)

# the position in this tuple keys each scheme's random stream; append only
SCHEMES = ("random", "greedy", "repulsive", "ims-es", "ims-vs", "exhaustive", "ideal")
SWEEPABLE = ("M", "K", "tau_p", "L", "loc_error_m", "feature_source")
DIVERSITY_SCHEMES = ("repulsive", "ims-es", "ims-vs")


class ExperimentError(RuntimeError):
    def __init__(self, message, failures=()):
        super().__init__(message)
        self.failures = list(failures)


@dataclass
class ExperimentSpec:
    radio: sc.RadioParams = field(default_factory=sc.RadioParams)
    M: int = 200
    K: int = 40
    L: int = 1
    area_km: float = 1.0
    schemes: tuple = ("random", "greedy", "repulsive", "ims-es", "ideal")
    drops: int = 100
    seed: int = 0
    sweep_param: str | None = None
    sweep_values: tuple = ()
    ims: ImsParams = field(default_factory=ImsParams)
    greedy_iters: int = 20
    feature_source: str = "location"
    loc_error_m: float = 0.0
    exhaustive_objective: str = "rate"
    deterministic: bool = False
    deterministic_sweeps: int = 2000
    jobs: int = 1

    def __post_init__(self):
        if self.drops < 1:
            raise ValueError("drops must be >= 1")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown:
            raise ValueError(f"unknown schemes {sorted(unknown)}; choose from {SCHEMES}")
        if self.sweep_param is not None and self.sweep_param not in SWEEPABLE:
            raise ValueError(f"cannot sweep {self.sweep_param!r}; choose from {SWEEPABLE}")
        if self.sweep_param is not None and not self.sweep_values:
            raise ValueError("a sweep needs at least one value")
        if self.exhaustive_objective not in ("rate", "fitness"):
            raise ValueError("exhaustive_objective must be 'rate' or 'fitness'")
        FeatureSource(self.feature_source)

    @property
    def tau_p(self) -> int:
        return self.radio.num_pilots

    def at(self, value) -> "ExperimentSpec":
        """Copy of the spec with the sweep parameter set to ``value``."""
        if self.sweep_param is None:
            return self
        name = self.sweep_param
        if name == "tau_p":
            return replace(self, radio=replace(self.radio, num_pilots=int(value)))
        if name in ("M", "K", "L"):
            return replace(self, **{name: int(value)})
        if name == "loc_error_m":
            return replace(self, loc_error_m=float(value))
        return replace(self, feature_source=str(value))

    def sweep_points(self) -> list:
        return list(self.sweep_values) if self.sweep_param else [None]

    def ims_params(self) -> ImsParams:
        if self.deterministic and self.ims.max_sweeps is None:
            return replace(self.ims, max_sweeps=self.deterministic_sweeps)
        return self.ims


def _scheme_rng(spec: ExperimentSpec, drop: int, scheme: str) -> np.random.Generator:
    return sc.drop_rng(spec.seed, drop, sc.SOLVER, SCHEMES.index(scheme))


def draw_channel(spec: ExperimentSpec, drop: int):
    """Topology and large-scale fading of one drop; shared by every scheme."""
    topo = sc.generate_topology(spec.M, spec.K, spec.L, spec.area_km,
                                rng=sc.drop_rng(spec.seed, drop, sc.PLACEMENT))
    scen = sc.Scenario(spec.radio, topo, spec.seed)
    ls = large_scale(scen, rng=sc.drop_rng(spec.seed, drop, sc.SHADOWING))
    return scen, ls


def assign(spec: ExperimentSpec, scheme: str, scen: sc.Scenario, ls, drop: int, dm=None):
    """Pilot vector chosen by ``scheme``; ``None`` for the ideal scheme."""
    K, tau_p = spec.K, spec.tau_p
    rho_p, rho_u, _ = normalized_snrs(spec.radio)
    rng = _scheme_rng(spec, drop, scheme)
    if scheme == "ideal":
        return None
    if scheme == "random":
        return random_assignment(K, tau_p, rng).p
    if scheme == "greedy":
        return greedy_assignment(ls.beta, tau_p, rho_p=rho_p, rho_u=rho_u, L=spec.L,
                                 n_iters=spec.greedy_iters, rng=rng).p
    if scheme == "repulsive":
        return repulsive_assignment(dm, tau_p, rng).p
    if scheme in ("ims-es", "ims-vs"):
        params = replace(spec.ims_params(), mode=ClusterMode.ES if scheme == "ims-es" else ClusterMode.VS)
        return ims(dm, tau_p, params, rng).pilots
    if scheme == "exhaustive":
        if spec.exhaustive_objective == "rate":
            return exhaustive_sum_rate(ls.beta, tau_p, rho_p=rho_p, rho_u=rho_u, L=spec.L)
        lb, ub = cluster_bounds(K, tau_p, ClusterMode.VS)
        return exhaustive_dcp(dm, tau_p, lb, ub).p
    raise ValueError(f"unknown scheme {scheme!r}")


def evaluate(spec: ExperimentSpec, beta: np.ndarray, pilots) -> tuple[np.ndarray, np.ndarray]:
    """Per-UE (UL, DL) throughput in bit/s for a pilot vector (``None`` = ideal)."""
    rho_p, rho_u, rho_d = normalized_snrs(spec.radio)
    contamination = pilots is not None
    if pilots is None:
        pilots = unique_pilots(beta.shape[1])
    gamma = estimation_stats(beta, pilots, spec.tau_p, rho_p).gamma
    eta_u = maxmin_ul_power(beta, gamma, pilots, spec.L, rho_u, contamination)
    ul = ul_rate(beta, gamma, pilots, eta_u, spec.L, rho_u, contamination)
    dl = dl_rate(beta, gamma, pilots, dl_power_alloc(gamma), spec.L, rho_d, contamination)
    return throughput(ul, spec.radio), throughput(dl, spec.radio)


def run_drop(spec: ExperimentSpec, drop: int, dump_channels: str | None = None) -> dict:
    """All schemes on one drop: {scheme: (ul_tput, dl_tput)}."""
    scen, ls = draw_channel(spec, drop)
    dm = None
    if any(s in DIVERSITY_SCHEMES for s in spec.schemes) or (
            "exhaustive" in spec.schemes and spec.exhaustive_objective == "fitness"):
        dm = build_diversity(spec.feature_source, ue_positions=scen.topology.ue_positions,
                             area_km=spec.area_km, beta=ls.beta, loc_error_std_m=spec.loc_error_m,
                             rng=sc.drop_rng(spec.seed, drop, sc.LOCATION_ERROR))
    if dump_channels:
        dump_channels_csv(Path(dump_channels) / f"drop{drop}", ls)
    out = {}
    for scheme in spec.schemes:
        pilots = assign(spec, scheme, scen, ls, drop, dm)
        out[scheme] = evaluate(spec, ls.beta, pilots)
    return out


@dataclass
class ExperimentResult:
    sweep_param: str | None
    rows: list = field(default_factory=list)  # (scheme, sweep_value, drop, ue, ul, dl)
    failures: list = field(default_factory=list)

    def samples(self, scheme: str, sweep_value=None, metric: str = "ul") -> np.ndarray:
        col = 4 if metric == "ul" else 5
        return np.array([r[col] for r in self.rows if r[0] == scheme and r[1] == sweep_value])

    def schemes(self) -> list:
        return list(dict.fromkeys(r[0] for r in self.rows))

    def sweep_values(self) -> list:
        return list(dict.fromkeys(r[1] for r in self.rows))

    def percentile(self, scheme, q, sweep_value=None, metric="ul") -> float:
        return percentile(self.samples(scheme, sweep_value, metric), q)

    def mean(self, scheme, sweep_value=None, metric="ul") -> float:
        return float(np.mean(self.samples(scheme, sweep_value, metric)))

    def cdf(self, scheme, sweep_value=None, metric="ul") -> tuple[np.ndarray, np.ndarray]:
        return empirical_cdf(self.samples(scheme, sweep_value, metric))

    def summary(self) -> list:
        """(scheme, sweep_value, metric, value) rows: mean, 5th and 95th percentiles."""
        rows = []
        for value in self.sweep_values():
            for scheme in self.schemes():
                for metric in ("ul", "dl"):
                    x = self.samples(scheme, value, metric)
                    rows.append((scheme, value, f"{metric}_mean_bps", float(np.mean(x))))
                    rows.append((scheme, value, f"{metric}_p5_bps", percentile(x, 5)))
                    rows.append((scheme, value, f"{metric}_p95_bps", percentile(x, 95)))
        return rows


def percentile(samples, q: float) -> float:
    """Linearly interpolated order statistic at rank (n - 1) * q / 100."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("percentile of an empty sample")
    if not 0 <= q <= 100:
        raise ValueError(f"q must be in [0, 100], got {q}")
    pos = (x.size - 1) * q / 100.0
    lo = int(np.floor(pos))
    hi = min(lo + 1, x.size - 1)
    return float(x[lo] + (pos - lo) * (x[hi] - x[lo]))


def empirical_cdf(samples) -> tuple[np.ndarray, np.ndarray]:
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    return x, np.arange(1, x.size + 1) / x.size


def _drop_task(args):
    spec, value, drop, dump = args
    try:
        return value, drop, run_drop(spec.at(value), drop, dump), None
    except Exception as exc:  # reported per drop, the rest of the run continues
        return value, drop, None, f"{type(exc).__name__}: {exc}"


def run_experiment(spec: ExperimentSpec, dump_channels: str | None = None,
                   raise_on_failure: bool = True) -> ExperimentResult:
    tasks = [(spec, v, d, dump_channels) for v in spec.sweep_points() for d in range(spec.drops)]
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            outputs = list(pool.map(_drop_task, tasks, chunksize=max(1, len(tasks) // (4 * spec.jobs))))
    else:
        outputs = [_drop_task(t) for t in tasks]

    result = ExperimentResult(spec.sweep_param)
    for value, drop, out, err in sorted(outputs, key=lambda o: (spec.sweep_points().index(o[0]), o[1])):
        if err is not None:
            result.failures.append({"sweep_value": value, "drop": drop, "error": err})
            log.warning("drop %d (sweep %r) failed: %s", drop, value, err)
            continue
        for scheme in spec.schemes:
            ul, dl = out[scheme]
            for ue in range(len(ul)):
                result.rows.append((scheme, value, drop, ue, float(ul[ue]), float(dl[ue])))
    if result.failures and raise_on_failure:
        raise ExperimentError(f"{len(result.failures)} drop(s) failed", result.failures)
    return result


SAMPLE_COLUMNS = ("scheme", "sweep_param", "sweep_value", "drop", "ue", "ul_tput_bps", "dl_tput_bps")
SUMMARY_COLUMNS = ("scheme", "sweep_value", "metric", "value")


def emit(result: ExperimentResult, out_dir, formats=("csv",), prefix: str = "") -> list:
    """Write samples/summary CSV (and a JSON mirror); returns the written paths."""
    out_dir = Path(out_dir)
    written = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if "csv" in formats:
            path = out_dir / f"{prefix}samples.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(SAMPLE_COLUMNS)
                for scheme, value, drop, ue, ul, dl in result.rows:
                    w.writerow((scheme, result.sweep_param or "", "" if value is None else value,
                                drop, ue, repr(ul), repr(dl)))
            written.append(path)
            path = out_dir / f"{prefix}summary.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(SUMMARY_COLUMNS)
                for scheme, value, metric, v in (result.summary() if result.rows else []):
                    w.writerow((scheme, "" if value is None else value, metric, repr(v)))
            written.append(path)
        if "json" in formats:
            path = out_dir / f"{prefix}results.json"
            payload = {
                "sweep_param": result.sweep_param,
                "samples": [dict(zip(SAMPLE_COLUMNS, (r[0], result.sweep_param, *r[1:]))) for r in result.rows],
                "summary": [dict(zip(SUMMARY_COLUMNS, r)) for r in (result.summary() if result.rows else [])],
                "failures": result.failures,
            }
            path.write_text(json.dumps(payload, indent=1))
            written.append(path)
    except OSError as exc:
        raise OSError(f"cannot write results under {out_dir}: {exc}") from exc
    return written


def read_samples(path) -> ExperimentResult:
    """Load a samples CSV written by :func:`emit`."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows, param = [], None
        for rec in reader:
            param = rec["sweep_param"] or None
            value = rec["sweep_value"]
            if value == "":
                value = None
            else:
                try:
                    value = json.loads(value)
                except json.JSONDecodeError:
                    pass
            rows.append((rec["scheme"], value, int(rec["drop"]), int(rec["ue"]),
                         float(rec["ul_tput_bps"]), float(rec["dl_tput_bps"])))
    return ExperimentResult(param, rows)


def spec_to_dict(spec: ExperimentSpec) -> dict:
    d = asdict(spec)
    d["ims"]["mode"] = spec.ims.mode.value
    return d
