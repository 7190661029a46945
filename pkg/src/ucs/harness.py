"""Experiment sweeps: instance generation, seeded SLA runs, MSDR tables.

Every random draw is keyed off ``master_seed`` through
:class:`numpy.random.SeedSequence` spawn keys, so a row's numbers do not
depend on which worker ran it or in what order.  The signal of trial
``i`` is shared across the M/SNR grid (common random numbers), which keeps
trend comparisons across M from drowning in instance noise.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .sla import SlaConfig, mix_seeds, sla_mcmc
from .sources import SourceKind, SourceSpec, generate_signal, measure

THREADS_ENV = "UCS_THREADS"

RESULT_HEADER = [
    "source", "n", "m", "snr_db", "trial", "seed_mse", "mixed_mse", "msdr_db", "n_levels",
    "super_iterations", "ls_mse", "ls_msdr_db", "signal_power", "error",
]
SUMMARY_HEADER = [
    "source", "snr_db", "m", "trials", "msdr_db", "mean_msdr_db", "std_msdr_db", "ls_msdr_db",
    "failures",
]
TIMING_HEADER = ["source", "n", "m", "snr_db", "trial", "seed", "wall_s"]
TRACE_HEADER = ["source", "m", "snr_db", "trial", "seed", "t", "s", "h_q", "resid", "energy"]

# stream tags for SeedSequence spawn keys
_SIGNAL, _MEASURE, _CHAIN = 0, 1, 2


@dataclass(frozen=True)
class ExperimentSpec:
    source: SourceSpec = field(default_factory=SourceSpec.bernoulli)
    n: int = 1000
    m_grid: tuple = (500,)
    snr_grid_db: tuple = (10.0,)
    trials: int = 10
    seeds_per_trial: int = 5
    sla: SlaConfig = field(default_factory=SlaConfig)
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "m_grid", tuple(int(m) for m in self.m_grid))
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        if self.trials < 1 or self.seeds_per_trial < 1:
            raise ValueError("trials and seeds_per_trial must be at least 1")
        if not self.m_grid or not self.snr_grid_db:
            raise ValueError("M and SNR grids must be nonempty")
        if self.n <= self.sla.q:
            raise ValueError(f"n={self.n} must exceed the context depth q={self.sla.q}")
        if any(m < 1 for m in self.m_grid):
            raise ValueError("measurement counts must be positive")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")


@dataclass
class ResultRow:
    source: str
    n: int
    m: int
    snr_db: float
    trial: int
    seed_mse: tuple = ()
    mixed_mse: float = math.nan
    msdr_db: float = math.nan
    n_levels: tuple = ()
    super_iterations: tuple = ()
    ls_mse: float = math.nan
    ls_msdr_db: float = math.nan
    signal_power: float = math.nan
    error: str = ""
    wall_s: tuple = ()
    seed_estimates: list = field(default_factory=list, repr=False)
    mixed_estimate: np.ndarray = field(default=None, repr=False)
    signal: np.ndarray = field(default=None, repr=False)


def msdr(x, x_hat):
    """``10 log10(E[x^2] / MSE)`` in dB; an exact estimate has no finite value."""
    x = np.asarray(x, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if x.shape != x_hat.shape:
        raise ValueError("x and x_hat differ in shape")
    mse = float(np.mean((x - x_hat) ** 2))
    if mse == 0.0:
        raise ValueError("MSE is zero; MSDR is unbounded")
    power = float(np.mean(x * x))
    if power == 0.0:
        raise ValueError("signal has zero power")
    return 10.0 * math.log10(power / mse)


def baseline_least_squares(y, phi):
    """Minimum-norm least-squares solution of ``y = phi @ x``."""
    return np.linalg.lstsq(np.asarray(phi, dtype=float), np.asarray(y, dtype=float), rcond=None)[0]


def _snr_key(snr_db):
    # spawn keys must be non-negative ints; milli-dB with an offset covers [-1000, inf)
    return int(round((float(snr_db) + 1000.0) * 1000))


def _stream(spec, *key):
    return np.random.default_rng(np.random.SeedSequence(spec.master_seed, spawn_key=key))


def _instance(spec, m, snr_db, trial):
    x = generate_signal(spec.source, spec.n, _stream(spec, _SIGNAL, trial))
    ms = measure(x, m, snr_db, _stream(spec, _MEASURE, m, _snr_key(snr_db), trial))
    return x, ms


def _run_seed(spec, m, snr_db, trial, seed, want_trace):
    x, ms = _instance(spec, m, snr_db, trial)
    rows = [] if want_trace else None
    t0 = time.perf_counter()
    rng = _stream(spec, _CHAIN, m, _snr_key(snr_db), trial, seed)
    x_hat, trace = sla_mcmc(ms.y, ms.phi, ms.sigma_z_sq, spec.sla, rng, energy_trace=rows)
    return x_hat, trace, time.perf_counter() - t0, rows


def default_threads():
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    k = int(raw)
    if k < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer")
    return k


def run_experiment(spec: ExperimentSpec, threads=None, trace=False, keep_estimates=False):
    """Run the full grid; returns ``(rows, energy_traces)`` in a fixed order.

    ``energy_traces`` maps ``(m, snr, trial, seed)`` to per-super-iteration
    rows when ``trace`` is set, else it is empty.
    """
    threads = default_threads() if threads is None else int(threads)
    if threads < 1:
        raise ValueError("threads must be positive")
    jobs = [(m, snr, trial, seed)
            for m in spec.m_grid for snr in spec.snr_grid_db
            for trial in range(spec.trials) for seed in range(spec.seeds_per_trial)]

    def work(job):
        try:
            return job, _run_seed(spec, *job, trace), None
        except Exception as exc:  # recorded in the row, the sweep goes on
            return job, None, f"{type(exc).__name__}: {exc}"

    if threads == 1:
        done = [work(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            done = list(pool.map(work, jobs))
    by_job = {job: (out, err) for job, out, err in done}

    rows, traces = [], {}
    for m in spec.m_grid:
        for snr in spec.snr_grid_db:
            for trial in range(spec.trials):
                row = _assemble(spec, m, snr, trial, by_job, traces, keep_estimates)
                rows.append(row)
    return rows, traces


def _assemble(spec, m, snr, trial, by_job, traces, keep):
    row = ResultRow(spec.source.kind.value, spec.n, m, snr, trial)
    outs, errs = [], []
    for seed in range(spec.seeds_per_trial):
        out, err = by_job[(m, snr, trial, seed)]
        if err:
            errs.append(f"seed {seed}: {err}")
            continue
        outs.append(out)
        if out[3] is not None:
            traces[(m, snr, trial, seed)] = out[3]
    try:
        x, ms = _instance(spec, m, snr, trial)
        row.signal_power = float(np.mean(x * x))
        x_ls = baseline_least_squares(ms.y, ms.phi)
        row.ls_mse = float(np.mean((x - x_ls) ** 2))
        row.ls_msdr_db = msdr(x, x_ls)
        if outs:
            ests = [o[0] for o in outs]
            row.seed_mse = tuple(float(np.mean((x - e) ** 2)) for e in ests)
            row.n_levels = tuple(o[1].n_levels for o in outs)
            row.super_iterations = tuple(o[1].total_iterations for o in outs)
            row.wall_s = tuple(o[2] for o in outs)
            mixed = mix_seeds(ests)
            row.mixed_mse = float(np.mean((x - mixed) ** 2))
            row.msdr_db = msdr(x, mixed) if row.mixed_mse > 0 else math.inf
            if keep:
                row.seed_estimates, row.mixed_estimate, row.signal = ests, mixed, x
    except Exception as exc:
        errs.append(f"{type(exc).__name__}: {exc}")
    row.error = "; ".join(errs)
    return row


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return " ".join(_fmt(e) for e in v)
    return str(v)


def _write(path, header, records):
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for rec in records:
        w.writerow([_fmt(v) for v in rec])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def emit_csv(rows, path=None):
    """One line per (m, snr, trial); wall-clock times go to :func:`emit_timings`."""
    return _write(path, RESULT_HEADER, ([getattr(r, k) for k in RESULT_HEADER] for r in rows))


def emit_timings(rows, path=None):
    recs = []
    for r in rows:
        for seed, t in enumerate(r.wall_s):
            recs.append((r.source, r.n, r.m, r.snr_db, r.trial, seed, round(t, 6)))
    return _write(path, TIMING_HEADER, recs)


def emit_traces(spec, traces, path=None):
    recs = []
    for (m, snr, trial, seed) in sorted(traces):
        for t, s, h, res, e in traces[(m, snr, trial, seed)]:
            recs.append((spec.source.kind.value, m, snr, trial, seed, int(t), float(s), float(h),
                         float(res), float(e)))
    return _write(path, TRACE_HEADER, recs)


def read_results(path):
    """Parse a results CSV back into :class:`ResultRow` objects."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RESULT_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [_parse_row(rec) for rec in reader]


def _floats(text):
    return tuple(float(t) for t in text.split()) if text else ()


def _ints(text):
    return tuple(int(t) for t in text.split()) if text else ()


def _parse_row(rec):
    return ResultRow(
        source=rec["source"], n=int(rec["n"]), m=int(rec["m"]), snr_db=float(rec["snr_db"]),
        trial=int(rec["trial"]), seed_mse=_floats(rec["seed_mse"]),
        mixed_mse=float(rec["mixed_mse"]), msdr_db=float(rec["msdr_db"]),
        n_levels=_ints(rec["n_levels"]), super_iterations=_ints(rec["super_iterations"]),
        ls_mse=float(rec["ls_mse"]), ls_msdr_db=float(rec["ls_msdr_db"]),
        signal_power=float(rec["signal_power"]), error=rec["error"],
    )


def aggregate(rows):
    """Per (source, snr, m) summary records, in grid order.

    ``msdr_db`` pools squared errors over trials before taking the ratio
    (MSE averaged over draws); ``mean_msdr_db``/``std_msdr_db`` are the
    arithmetic mean and sample std of the per-trial dB values.
    """
    groups = {}
    for r in rows:
        groups.setdefault((r.source, r.snr_db, r.m), []).append(r)
    out = []
    for (src, snr, m), grp in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])):
        ok = [r for r in grp if math.isfinite(r.mixed_mse) and not r.error]
        fails = len(grp) - len(ok)
        if ok:
            power = sum(r.signal_power for r in ok)
            mse = sum(r.mixed_mse for r in ok)
            ls = sum(r.ls_mse for r in ok)
            pooled = 10 * math.log10(power / mse) if mse > 0 else math.inf
            ls_db = 10 * math.log10(power / ls) if ls > 0 else math.inf
            dbs = np.array([r.msdr_db for r in ok], dtype=float)
            mean_db = float(np.mean(dbs))
            std_db = float(np.std(dbs, ddof=1)) if dbs.size > 1 else 0.0
        else:
            pooled = ls_db = mean_db = std_db = math.nan
        out.append((src, snr, m, len(grp), pooled, mean_db, std_db, ls_db, fails))
    return out


def emit_plotdata(rows, path=None):
    """Plot-ready table grouped by source and SNR: M, MSDR, spread."""
    return _write(path, SUMMARY_HEADER, aggregate(rows))


# --- configuration -----------------------------------------------------------

PRESETS = {
    "desk": dict(n=1000, m_grid=(200, 300, 400, 500, 600, 700), snr_grid_db=(5.0, 10.0),
                 trials=10, seeds_per_trial=5),
    "full": dict(n=10000, m_grid=(2000, 3000, 4000, 5000, 6000, 7000), snr_grid_db=(5.0, 10.0),
                  trials=50, seeds_per_trial=5),
}

_SOURCE_KEYS = ("p", "p01", "p10", "error")


def _tuple(text, conv):
    return tuple(conv(t) for t in text.replace(",", " ").split())


def load_config(path=None, preset="desk"):
    """Build an :class:`ExperimentSpec` from an INI file over a named preset.

    Sections: ``[experiment]`` (source, n, m_grid, snr_grid_db, trials,
    seeds_per_trial, master_seed), ``[source]`` (p, p01, p10, error) and
    ``[sla]`` (any :class:`SlaConfig` field).  Missing keys keep defaults.
    """
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    unknown = set(cp.sections()) - {"experiment", "source", "sla"}
    if unknown:
        raise ValueError(f"unknown config section(s): {sorted(unknown)}")
    ex = cp["experiment"] if cp.has_section("experiment") else {}
    kw = dict(PRESETS[preset])
    kind = SourceKind(ex.get("source", "bernoulli"))
    src_kw = {}
    if cp.has_section("source"):
        for k, v in cp["source"].items():
            if k not in _SOURCE_KEYS:
                raise ValueError(f"unknown [source] key {k!r}")
            src_kw[k] = float(v)
    source = SourceSpec(kind, **src_kw) if src_kw else _default_source(kind)
    for key, conv in (("n", int), ("trials", int), ("seeds_per_trial", int), ("master_seed", int)):
        if key in ex:
            kw[key] = conv(ex[key])
    if "m_grid" in ex:
        kw["m_grid"] = _tuple(ex["m_grid"], int)
    if "snr_grid_db" in ex:
        kw["snr_grid_db"] = _tuple(ex["snr_grid_db"], float)
    extra = set(ex) - {"source", "n", "m_grid", "snr_grid_db", "trials", "seeds_per_trial",
                       "master_seed"}
    if extra:
        raise ValueError(f"unknown [experiment] key(s): {sorted(extra)}")
    sla = SlaConfig()
    if cp.has_section("sla"):
        types = {f.name: f.type for f in fields(SlaConfig)}
        upd = {}
        for k, v in cp["sla"].items():
            if k not in types:
                raise ValueError(f"unknown [sla] key {k!r}")
            upd[k] = _sla_value(k, v, getattr(sla, k))
        sla = replace(sla, **upd)
    return ExperimentSpec(source=source, sla=sla, **kw)


def _default_source(kind):
    return {
        SourceKind.BERNOULLI: SourceSpec.bernoulli,
        SourceKind.SPARSE_LAPLACE: SourceSpec.sparse_laplace,
        SourceKind.MARKOV_UNIFORM: SourceSpec.markov_uniform,
        SourceKind.MARKOV_RADEMACHER: SourceSpec.markov_rademacher,
        SourceKind.MARKOV_FOUR_STATE: SourceSpec.markov_four_state,
    }[kind]()


def _sla_value(key, text, current):
    text = text.strip()
    if key == "delta_q_hat":
        if text.lower() in ("", "none", "default"):
            return None
        return text if text == "bound" else float(text)
    if isinstance(current, bool):
        return text.lower() in ("1", "true", "yes", "on")
    if isinstance(current, int):
        return int(text)
    return float(text)
