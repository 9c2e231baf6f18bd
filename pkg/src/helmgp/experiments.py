"""End-to-end pipeline: data -> fit -> predict -> metrics -> files."""
from dataclasses import dataclass, field
import logging
import os
import shutil
import tempfile
import time

import numpy as np

from . import io as hio
from .config import IngestSource, SimSource
from .errors import HelmGPError
from .fields import concat, eval_field, rmse, simulate_buoys, SimGrid
from .gp import condition, log_marginal_likelihood, predict, z_values
from .hyperopt import fit
from .ingest import apply_filter, read_drifters
from .kernels import Family

log = logging.getLogger(__name__)

# velocity RMSE reported for each simulated experiment, for side-by-side reading
REFERENCE_RMSE_VEL = {
    "vortex": {"helmholtz": 0.24, "velocity": 0.72},
    "vortex_current": {"helmholtz": 0.30, "velocity": 0.49},
    "divergence_b15": {"helmholtz": 0.04, "velocity": 0.10},
    "duffing_b0.5": {"helmholtz": 0.96, "velocity": 2.05},
    "duffing_b5": {"helmholtz": 0.19, "velocity": 0.60},
}


class StageError(HelmGPError):
    """Wraps a failure with the pipeline stage it happened in."""

    _DEFAULT_CODES = {"data": 3, "emit": 3, "fit": 4, "predict": 4}

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", self._DEFAULT_CODES.get(stage, 1))
        super().__init__(f"stage '{stage}' failed: {cause}")


@dataclass
class FamilyResult:
    family: Family
    spec: object
    trace: list
    iterations: int
    converged: bool
    posterior: object = None
    rmse: dict = field(default_factory=dict)


@dataclass
class RunReport:
    name: str
    n_obs: int
    results: dict
    files: dict
    timings: dict
    data: object = None
    truth: object = None
    grid: np.ndarray = None

    def items(self):
        """Flat ``key: value`` content of the report file (timings excluded)."""
        out = {"experiment": self.name, "n_obs": self.n_obs,
               "families": ",".join(f.value for f in self.results)}
        for fam, r in self.results.items():
            p = f"{fam.value}."
            for k, v in r.spec.as_dict().items():
                out[p + k] = float(v)
            out[p + "lml_init"] = float(r.trace[0])
            out[p + "lml_final"] = float(max(r.trace))
            out[p + "iterations"] = r.iterations
            out[p + "converged"] = str(r.converged).lower()
            for k, v in r.rmse.items():
                out[p + "rmse_" + k] = float(v)
            ref = REFERENCE_RMSE_VEL.get(self.name, {}).get(fam.value)
            if ref is not None:
                out[p + "reference_rmse_vel"] = ref
        for k, v in self.files.items():
            out["file." + k] = v
        return out


def acquire(cfg):
    """Training data (and the truth field for simulated sources)."""
    src = cfg.source
    if isinstance(src, SimSource):
        parts, offset = [], 0
        for b in src.buoys:
            parts.append(simulate_buoys(src.field, src.grid, b, id_offset=offset))
            offset += len(b.starts)
        return (parts[0] if len(parts) == 1 else concat(parts)), src.field
    if isinstance(src, IngestSource):
        records, rejects = read_drifters(src.path, src.schema)
        if rejects:
            log.warning("%d malformed rows skipped in %s", len(rejects), src.path)
        return apply_filter(records, src.filter), None
    raise TypeError(f"unknown data source {src!r}")


def test_grid(cfg, data):
    if cfg.test_grid is not None:
        return cfg.test_grid
    if isinstance(cfg.source, SimSource):
        return cfg.source.grid
    lo, hi = data.locations.min(axis=0), data.locations.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    lo, hi = lo - 0.05 * span, hi + 0.05 * span
    n1, n2 = cfg.test_grid_n
    return SimGrid(float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1]), n1, n2)


def fit_family(cfg, family, data):
    init = cfg.prior(family)
    if cfg.pinned:
        return FamilyResult(family, init, [log_marginal_likelihood(init, data)], 0, True)
    r = fit(init, data, cfg.optim)
    return FamilyResult(family, r.spec, r.trace, r.iterations, r.converged)


def metrics(post, truth):
    return {
        "vel": rmse(truth.velocity, post.mean_velocity),
        "div": rmse(truth.div, post.mean("div")),
        "vort": rmse(truth.vort, post.mean("vort")),
    }


def _stage(name, fn, *args):
    try:
        return fn(*args)
    except StageError:
        raise
    except (HelmGPError, ValueError, OSError) as exc:
        raise StageError(name, exc) from exc


def run(cfg, out=None, families=None, stages=("data", "fit", "predict")):
    """Execute the pipeline and write its files into ``out``.

    Files are staged in a temporary directory and moved into ``out`` only
    when every stage succeeded, so a failed run leaves nothing behind.
    Timings go to ``timings.txt`` so that every other file is reproducible
    byte for byte.
    """
    out = out or cfg.out
    families = tuple(Family(f) for f in (families or cfg.families))
    timings = {}
    t0 = time.monotonic()
    data, field_ = _stage("data", acquire, cfg)
    timings["data"] = time.monotonic() - t0

    results = {}
    if "fit" in stages or "predict" in stages:
        for fam in families:
            t = time.monotonic()
            results[fam] = _stage("fit", fit_family, cfg, fam, data)
            timings[f"fit.{fam.value}"] = time.monotonic() - t

    grid = truth = None
    if "predict" in stages:
        g = test_grid(cfg, data)
        grid = g.points
        truth = eval_field(field_, grid) if field_ is not None else None
        for fam, r in results.items():
            t = time.monotonic()
            cond = _stage("predict", condition, r.spec, data)
            r.posterior = _stage("predict", predict, cond, None, grid)
            timings[f"predict.{fam.value}"] = time.monotonic() - t
            if truth is not None:
                r.rmse = metrics(r.posterior, truth)

    timings["total"] = time.monotonic() - t0  # compute time; file writing excluded
    report = RunReport(cfg.name, len(data), results, {}, timings, data, truth, grid)
    if out is not None:
        _stage("emit", _emit, report, out)
    return report


def _emit(report, out):
    parent = os.path.dirname(os.path.abspath(out)) or "."
    os.makedirs(parent, exist_ok=True)
    tmp = tempfile.mkdtemp(prefix=".helmgp-", dir=parent)
    try:
        files = {"dataset": "dataset.csv"}
        hio.write_dataset(report.data, os.path.join(tmp, "dataset.csv"))
        for fam, r in report.results.items():
            files[f"trace.{fam.value}"] = f"trace_{fam.value}.csv"
            hio.write_trace(r.trace, os.path.join(tmp, files[f"trace.{fam.value}"]))
            if r.posterior is not None:
                files[f"grid.{fam.value}"] = f"grid_{fam.value}.csv"
                hio.emit_grid(r.posterior, os.path.join(tmp, files[f"grid.{fam.value}"]),
                              truth=report.truth)
        report.files = files
        hio.write_report(report.items(), os.path.join(tmp, "report.txt"))
        hio.write_report({k: float(v) for k, v in report.timings.items()},
                         os.path.join(tmp, "timings.txt"))
        os.makedirs(out, exist_ok=True)
        for name in os.listdir(tmp):
            os.replace(os.path.join(tmp, name), os.path.join(out, name))
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    report.files = {k: os.path.join(out, v) for k, v in report.files.items()}


def center_divergence(post_spec, data, point=(0.0, 0.0)):
    """Posterior divergence mean, variance and z-value at one point."""
    p = predict(post_spec, data, np.asarray([point], dtype=float), fields=("div",))
    return float(p.mean_div[0]), float(p.var_div[0]), float(z_values(p, "div")[0])
