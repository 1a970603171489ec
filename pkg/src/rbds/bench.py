"""Experiment harness: configuration, repeated runs, sweeps and reports.

Configuration is flat ``key = value`` text with dotted namespaces::

    seed = 0
    repetitions = 10
    methods = rbds, lrrs_bd, lrrs
    data.classes = 5
    train.fraction = 0.2
    solver.lambda = 1.0      # shared by every method
    rbds.alpha = 400         # one method only

Lines starting with ``#`` are comments. Solver keys accept every
:class:`~rbds.solver.SolverConfig` field, with ``lambda`` as an alias of
``lam``.

Seeds: every random stream of repetition ``r`` is seeded with
``derive_seed(seed, r, stream)``, a splitmix64 chain (see
:func:`derive_seed`). Streams: 0 data generation, 1 train/test split,
2 train corruption, 3 test corruption, 4 dictionary initialization.
"""

from __future__ import annotations

import contextlib
import csv
import hashlib
import io
import os
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import baselines
from .classifier import evaluate, train_classifier
from .coder import code
from .datagen import CORRUPTION_KINDS, CorruptionSpec, SubspaceSpec, corrupt, gen_subspaces
from .mask import offblock_ratio
from .matrix_io import (LabeledDataset, load_dataset, one_hot, save_labels,
                        save_matrix)
from .solver import ConfigError, DivergenceError, SolverConfig, fit_rbds, write_trace

METHODS = ("rbds", "lrrs_bd", "lrrs", "rpca_preclean+lrrs")
MASK64 = (1 << 64) - 1

DEFAULTS = {
    "seed": "0",
    "repetitions": "10",
    "split": "0.5",
    "eta": "1.0",
    "methods": "rbds, lrrs_bd, lrrs",
    "per_sample_coding": "false",
    "recode_train": "false",
    "data.source": "synthetic",
    "data.classes": "5",
    "data.dim": "50",
    "data.rank": "3",
    "data.samples_per_class": "40",
    "data.noise_sigma": "0.0",
    "data.coef_offset": "1.0",
    "data.path": "",
    "data.labels": "",
    "data.format": "",
    "train.kind": "pixel_uniform",
    "train.fraction": "0.0",
    "train.image_shape": "",
    "test.kind": "pixel_uniform",
    "test.fraction": "0.0",
    "test.image_shape": "",
    "rpca.lambda": "auto",
}

_INT_KEYS = {"seed", "repetitions", "data.classes", "data.dim", "data.rank", "data.samples_per_class"}
_FLOAT_KEYS = {"split", "eta", "data.noise_sigma", "data.coef_offset", "train.fraction", "test.fraction"}
_SOLVER_FIELDS = {f.name: f for f in fields(SolverConfig)}
_SOLVER_ALIASES = {"lambda": "lam"}


# ---------------------------------------------------------------------------
# seeds


def splitmix64(x):
    """One splitmix64 step: advance by the golden gamma and mix."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master, *path):
    """Fold ``path`` into ``master`` with splitmix64: s <- mix(s ^ mix(p))."""
    s = splitmix64(int(master) & MASK64)
    for p in path:
        s = splitmix64(s ^ splitmix64(int(p) & MASK64))
    return s


# ---------------------------------------------------------------------------
# configuration


def parse_config_text(text):
    settings = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (t.strip() for t in line.split("=", 1))
        settings[key] = value
    return settings


def _solver_key(key):
    """``(namespace, field)`` for solver keys, else None."""
    ns, _, name = key.partition(".")
    name = _SOLVER_ALIASES.get(name, name)
    if ns in ("solver",) + METHODS and name in _SOLVER_FIELDS:
        return ns, name
    return None


def is_numeric_key(key):
    if key in _INT_KEYS or key in _FLOAT_KEYS or key == "rpca.lambda":
        return True
    sk = _solver_key(key)
    return bool(sk) and _SOLVER_FIELDS[sk[1]].type in ("float", "int", float, int)


def _as_bool(v):
    v = str(v).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _as_shape(v):
    if not v:
        return None
    try:
        h, w = (int(t) for t in v.lower().replace(",", "x").split("x"))
    except ValueError:
        raise ConfigError(f"image_shape must look like HxW, got {v!r}") from None
    return (h, w)


def _convert(key, value, kind):
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {value!r} as {kind.__name__}") from None


@dataclass
class ExperimentConfig:
    settings: dict
    data: SubspaceSpec | None
    data_path: str
    labels_path: str
    data_format: str
    split: float
    train_corruption: CorruptionSpec
    test_corruption: CorruptionSpec
    methods: tuple
    solvers: dict
    rpca_lambda: float | None
    eta: float
    repetitions: int
    seed: int
    per_sample_coding: bool
    recode_train: bool

    @classmethod
    def from_mapping(cls, overrides=None):
        settings = dict(DEFAULTS)
        for key, value in (overrides or {}).items():
            key = key.strip()
            if key not in DEFAULTS and _solver_key(key) is None:
                raise ConfigError(f"unknown configuration key {key!r}")
            settings[key] = str(value).strip()
        g = settings.get
        for key in _INT_KEYS:
            _convert(key, g(key), int)
        for key in _FLOAT_KEYS:
            _convert(key, g(key), float)

        methods = tuple(m.strip() for m in g("methods").split(",") if m.strip())
        if not methods:
            raise ConfigError("method list is empty")
        unknown = [m for m in methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; choose from {METHODS}")
        if len(set(methods)) != len(methods):
            raise ConfigError("duplicate methods")

        reps = int(g("repetitions"))
        if reps < 1:
            raise ConfigError("repetitions must be >= 1")
        split = float(g("split"))
        if not 0 < split < 1:
            raise ConfigError("split must lie in (0, 1)")
        eta = float(g("eta"))
        if not eta > 0:
            raise ConfigError("eta must be > 0")

        source = g("data.source")
        if source == "synthetic":
            data = SubspaceSpec(int(g("data.classes")), int(g("data.dim")), int(g("data.rank")),
                                int(g("data.samples_per_class")), float(g("data.noise_sigma")),
                                0, float(g("data.coef_offset")))
        elif source == "files":
            if not g("data.path") or not g("data.labels"):
                raise ConfigError("data.source = files needs data.path and data.labels")
            data = None
        else:
            raise ConfigError(f"data.source must be 'synthetic' or 'files', got {source!r}")

        corr = {}
        for part in ("train", "test"):
            kind = g(f"{part}.kind")
            if kind not in CORRUPTION_KINDS:
                raise ConfigError(f"{part}.kind must be one of {CORRUPTION_KINDS}")
            try:
                corr[part] = CorruptionSpec(kind, float(g(f"{part}.fraction")),
                                            _as_shape(g(f"{part}.image_shape")), 0)
            except ValueError as exc:
                raise ConfigError(f"{part} corruption: {exc}") from None

        solvers = {m: _solver_config(settings, m) for m in methods}
        rl = g("rpca.lambda")
        rpca_lambda = None if rl in ("", "auto") else _convert("rpca.lambda", rl, float)

        return cls(settings=settings, data=data, data_path=g("data.path"), labels_path=g("data.labels"),
                   data_format=g("data.format"), split=split,
                   train_corruption=corr["train"], test_corruption=corr["test"], methods=methods,
                   solvers=solvers, rpca_lambda=rpca_lambda, eta=eta, repetitions=reps,
                   seed=int(g("seed")), per_sample_coding=_as_bool(g("per_sample_coding")),
                   recode_train=_as_bool(g("recode_train")))

    @classmethod
    def from_text(cls, text, overrides=None):
        settings = parse_config_text(text)
        settings.update(overrides or {})
        return cls.from_mapping(settings)

    @classmethod
    def from_file(cls, path, overrides=None):
        return cls.from_text(Path(path).read_text(), overrides)

    def canonical_text(self):
        return "".join(f"{k} = {self.settings[k]}\n" for k in sorted(self.settings))

    def config_hash(self):
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]

    def with_overrides(self, **overrides):
        merged = dict(self.settings)
        merged.update({k: str(v) for k, v in overrides.items()})
        return ExperimentConfig.from_mapping(merged)


def _solver_config(settings, method):
    kw = {}
    for ns in ("solver", method):
        for key, value in settings.items():
            sk = _solver_key(key)
            if sk and sk[0] == ns:
                kw[sk[1]] = value
    typed = {}
    for name, value in kw.items():
        t = _SOLVER_FIELDS[name].type
        if t in ("bool", bool):
            typed[name] = _as_bool(value)
        elif t in ("int", int):
            typed[name] = _convert(name, value, int)
        else:
            typed[name] = _convert(name, value, float)
    return SolverConfig(**typed)


# ---------------------------------------------------------------------------
# running


@dataclass
class RunRecord:
    method: str
    repetition: int
    seed: int
    accuracy: float
    iterations: int
    converged: bool
    test_converged: bool
    wall_time: float
    offblock_ratio: float
    status: str = "ok"


@dataclass
class ExperimentReport:
    config_hash: str
    methods: tuple
    runs: list = field(default_factory=list)
    examples: dict = field(default_factory=dict)

    def summary(self):
        """One row per method, in declared method order."""
        rows = []
        for m in self.methods:
            rs = [r for r in self.runs if r.method == m]
            if not rs:
                continue
            acc = np.array([r.accuracy for r in rs])
            rows.append({
                "method": m,
                "mean_accuracy": float(np.mean(acc)),
                "std_accuracy": float(np.std(acc)),
                "mean_iterations": float(np.mean([r.iterations for r in rs])),
                "convergence_rate": float(np.mean([r.converged for r in rs])),
                "offblock_ratio": float(np.mean([r.offblock_ratio for r in rs])),
                "repetitions": len(rs),
                "config_hash": self.config_hash,
            })
        return rows

    def mean_accuracy(self, method):
        return next(r["mean_accuracy"] for r in self.summary() if r["method"] == method)


REPORT_COLUMNS = ["method", "mean_accuracy", "std_accuracy", "mean_iterations",
                  "convergence_rate", "offblock_ratio", "repetitions", "config_hash"]
RUN_COLUMNS = [f.name for f in fields(RunRecord)]


@contextlib.contextmanager
def kernel_threads():
    """Cap BLAS threads to ``RBDS_THREADS`` (0 or unset means library default)."""
    n = int(os.environ.get("RBDS_THREADS", "0") or 0)
    if n <= 0:
        yield
        return
    from threadpoolctl import threadpool_limits
    with threadpool_limits(limits=n):
        yield


def split_dataset(ds, ratio, seed):
    """Per-class random split; every class keeps at least one sample on each side."""
    rng = np.random.default_rng(seed)
    tr, te = [], []
    for c in range(1, ds.class_count + 1):
        idx = rng.permutation(np.flatnonzero(ds.labels == c))
        if idx.size < 2:
            raise ConfigError(f"class {c} has {idx.size} samples; cannot split")
        k = min(max(int(round(ratio * idx.size)), 1), idx.size - 1)
        tr.append(np.sort(idx[:k]))
        te.append(np.sort(idx[k:]))
    return ds.subset(np.concatenate(tr)), ds.subset(np.concatenate(te))


def _load_source(cfg, rep_seed):
    if cfg.data is not None:
        return gen_subspaces(replace(cfg.data, seed=rep_seed))
    return load_dataset(cfg.data_path, cfg.labels_path, cfg.data_format or None)


def _fit(method, train, scfg, cfg, trace):
    if method == "rbds":
        return fit_rbds(train, scfg, trace=trace)
    if method == "lrrs_bd":
        return baselines.fit_lrrs_bd(train, scfg, trace=trace)
    if method == "lrrs":
        return baselines.fit_lrrs(train, scfg, trace=trace)
    return baselines.fit_rpca_lrrs(train, scfg, cfg.rpca_lambda, trace=trace)[0]


def run_repetition(cfg, rep, trace=False, out_dir=None, keep_example=False):
    """All methods on one repetition; returns ``(records, examples)``."""
    s = lambda stream: derive_seed(cfg.seed, rep, stream)  # noqa: E731
    data = _load_source(cfg, s(0))
    train, test = split_dataset(data, cfg.split, s(1))
    train = LabeledDataset(corrupt(train.data, reseed_corruption(cfg.train_corruption, s(2))),
                           train.labels, train.class_count)
    test = LabeledDataset(corrupt(test.data, reseed_corruption(cfg.test_corruption, s(3))),
                          test.labels, test.class_count)
    H = one_hot(train)
    records, examples = [], {}
    for method in cfg.methods:
        scfg = cfg.solvers[method].with_updates(seed=s(4))
        t0 = time.perf_counter()
        try:
            model = _fit(method, train, scfg, cfg, trace)
            coding = code(test.data, model.dictionary, scfg, per_sample=cfg.per_sample_coding)
            Z_cls = model.Z_train
            if cfg.recode_train:
                Z_cls = code(train.data, model.dictionary, scfg).Z_hat
            clf = train_classifier(Z_cls, H, cfg.eta)
            acc = evaluate(clf, coding, test.labels)
            rec = RunRecord(method, rep, s(4), acc, model.iterations_used, model.converged,
                            coding.converged, time.perf_counter() - t0,
                            offblock_ratio(model.Z_train, model.mask))
        except DivergenceError as exc:
            rec = RunRecord(method, rep, s(4), 0.0, exc.iteration, False, False,
                            time.perf_counter() - t0, float("nan"), "diverged")
            model = None
        records.append(rec)
        if model is not None and out_dir is not None and trace:
            write_trace(Path(out_dir) / "traces" / f"rep{rep:02d}_{_slug(method)}.csv",
                        model.residual_history, model.mu_history, model.objective_history)
        if model is not None and keep_example:
            examples[method] = model
    return records, examples


def reseed_corruption(spec, seed):
    return CorruptionSpec(spec.kind, spec.fraction, spec.image_shape, seed)


def _slug(method):
    return method.replace("+", "_")


def run_experiment(cfg, out_dir=None, trace=None, figures=True, progress=None):
    """Run every method for every repetition.

    With ``out_dir`` the report CSV, per-run table, per-run traces, the
    config echo, the repetition-0 representations and figures are written
    there. ``progress`` is an optional callable receiving each RunRecord.
    """
    trace = (out_dir is not None) if trace is None else trace
    report = ExperimentReport(cfg.config_hash(), cfg.methods)
    with kernel_threads():
        for rep in range(cfg.repetitions):
            recs, ex = run_repetition(cfg, rep, trace=trace, out_dir=out_dir, keep_example=(rep == 0))
            report.runs.extend(recs)
            if rep == 0:
                report.examples = ex
            if progress:
                for r in recs:
                    progress(r)
    if out_dir is not None:
        write_outputs(report, cfg, out_dir, figures=figures)
    return report


def sweep(cfg, parameter, values, out_dir=None, figures=True, progress=None):
    """One report per value of the numeric config key ``parameter``."""
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    if not is_numeric_key(parameter):
        raise ConfigError(f"unknown or non-numeric sweep parameter {parameter!r}")
    reports = []
    for v in values:
        sub = cfg.with_overrides(**{parameter: v})
        sub_out = None if out_dir is None else Path(out_dir) / f"{_slug(parameter)}={v}"
        reports.append(run_experiment(sub, sub_out, figures=figures, progress=progress))
    if out_dir is not None:
        write_sweep_csv(Path(out_dir) / "sweep.csv", parameter, values, reports)
        if figures:
            from .plotting import plot_sweep
            plot_sweep(parameter, values, reports, Path(out_dir) / "sweep.png")
    return reports


# ---------------------------------------------------------------------------
# output


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_csv_text(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for row in report.summary():
        w.writerow([_fmt(row[c]) for c in REPORT_COLUMNS])
    return buf.getvalue()


def runs_csv_text(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_COLUMNS)
    for r in report.runs:
        w.writerow([_fmt(getattr(r, c)) for c in RUN_COLUMNS])
    return buf.getvalue()


def read_report_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out = dict(row)
            for c in ("mean_accuracy", "std_accuracy", "mean_iterations", "convergence_rate", "offblock_ratio"):
                out[c] = float(row[c])
            out["repetitions"] = int(row["repetitions"])
            rows.append(out)
    return rows


def read_runs_csv(path):
    runs = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            runs.append(RunRecord(
                method=row["method"], repetition=int(row["repetition"]), seed=int(row["seed"]),
                accuracy=float(row["accuracy"]), iterations=int(row["iterations"]),
                converged=row["converged"] == "True", test_converged=row["test_converged"] == "True",
                wall_time=float(row["wall_time"]), offblock_ratio=float(row["offblock_ratio"]),
                status=row.get("status", "ok")))
    return runs


def render_table(report):
    """Fixed-width text table of :meth:`ExperimentReport.summary`."""
    rows = report.summary()
    head = f"{'method':<20} {'mean_acc':>9} {'std':>7} {'iters':>8} {'conv':>6} {'offblock':>10}"
    lines = [f"config {report.config_hash}", head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r['method']:<20} {r['mean_accuracy']:>9.4f} {r['std_accuracy']:>7.4f} "
                     f"{r['mean_iterations']:>8.1f} {r['convergence_rate']:>6.2f} {r['offblock_ratio']:>10.3e}")
    return "\n".join(lines) + "\n"


def write_text_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_outputs(report, cfg, out_dir, figures=True):
    out = Path(out_dir)
    write_text_atomic(out / "report.csv", report_csv_text(report))
    write_text_atomic(out / "runs.csv", runs_csv_text(report))
    write_text_atomic(out / "report.txt", render_table(report))
    write_text_atomic(out / "config.txt", f"# config hash {report.config_hash}\n" + cfg.canonical_text())
    for method, model in report.examples.items():
        base = out / "models" / f"rep00_{_slug(method)}"
        save_matrix(model.Z_train, base.with_name(base.name + "_Z.bin"), "rawbin")
        save_labels(model.dictionary.atom_labels, base.with_name(base.name + "_atom_labels.csv"))
        save_labels(model.sample_labels, base.with_name(base.name + "_sample_labels.csv"))
    if figures:
        from .plotting import render_report_figures
        render_report_figures(report, out)


def write_sweep_csv(path, parameter, values, reports):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["parameter", "value"] + REPORT_COLUMNS)
    for v, rep in zip(values, reports):
        for row in rep.summary():
            w.writerow([parameter, _fmt(v)] + [_fmt(row[c]) for c in REPORT_COLUMNS])
    write_text_atomic(path, buf.getvalue())


def load_report_dir(out_dir):
    """Rebuild an :class:`ExperimentReport` (without models) from ``runs.csv``."""
    out = Path(out_dir)
    runs = read_runs_csv(out / "runs.csv")
    summary = read_report_csv(out / "report.csv")
    methods = tuple(r["method"] for r in summary)
    chash = summary[0]["config_hash"] if summary else ""
    return ExperimentReport(chash, methods, runs)

