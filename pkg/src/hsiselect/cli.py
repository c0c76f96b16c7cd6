"""Command-line front end: ``hsiselect select | classify | sweep | synth``.

Every flag can also come from an environment variable named
``HSISELECT_<FLAG>`` (upper case, dashes as underscores), e.g.
``HSISELECT_TRAIN_FRAC=0.25``.  Explicit flags win.
"""

from __future__ import annotations

import csv
import io
import logging
from pathlib import Path

import click

from . import datasets, metrics
from .cube import DEFAULT_LEVELS
from .selectors import METHODS, SelectorConfig
from .svm import SvmParams
from .pipeline import run_cell, select_for

ENV_PREFIX = "HSISELECT_"
SWEEP_COLUMNS = ("method", "k", "fraction", "seed", "oa", "aa", "kappa", "specificity")


def _env(flag: str) -> str:
    return ENV_PREFIX + flag.upper().replace("-", "_")


def _opt(flag: str, dest: str = None, **kw):
    decls = [f"--{flag}"] + ([dest] if dest else [])
    return click.option(*decls, envvar=_env(flag), show_envvar=True, **kw)


def _dataset_opts(f):
    f = _opt("labels", "labels", required=True, type=click.Path(exists=True, dir_okay=False),
             help="Ground-truth raster (.hdr) or CSV (row,col,label).")(f)
    f = _opt("cube", "cube", required=True, type=click.Path(exists=True, dir_okay=False),
             help="ENVI header of the hyperspectral cube.")(f)
    return f


def _selector_opts(f):
    f = _opt("threshold", "threshold", type=float, default=-0.02,
             help="MIBF interaction rejection threshold.")(f)
    f = _opt("beta", "beta", type=float, default=0.5, help="MIFS/NMIFS redundancy weight.")(f)
    f = _opt("levels", "levels", type=click.IntRange(min=1), default=DEFAULT_LEVELS,
             help="Quantization levels per band.")(f)
    return f


def _svm_opts(f):
    f = _opt("grid-search", "grid_search", is_flag=True, default=False,
             help="Cross-validated (C, gamma) search on the training pixels.")(f)
    f = _opt("svm-gamma", "svm_gamma", type=float, default=None,
             help="RBF width; default 1/(bands * mean scaled variance).")(f)
    f = _opt("svm-c", "svm_c", type=float, default=100.0, help="SVM box constraint C.")(f)
    f = _opt("seed", "seed", type=int, default=0, help="Run seed (split, CV folds).")(f)
    f = _opt("train-frac", "train_frac", type=click.FloatRange(0, 1, min_open=True, max_open=True),
             default=0.5, help="Per-class training fraction.")(f)
    return f


def _load(cube_path, labels_path):
    cube = datasets.load_envi(cube_path)
    gt = datasets.load_labels(labels_path, (cube.rows, cube.cols))
    return cube, gt, Path(cube_path).stem


def cell_name(dataset: str, method: str, k: int, fraction: float, seed: int) -> str:
    """File stem shared by ``classify`` and ``sweep`` for one (method, k, split) cell."""
    return f"{dataset}_{method}_k{k}_f{fraction:.6f}_s{seed}".replace(".", "p")


def _fail(e: Exception):
    raise click.ClickException(str(e)) from e


@click.group()
@click.option("--log-level", default="WARNING", envvar=_env("log-level"),
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
def main(log_level):
    """Hyperspectral band selection (MRMS and baseline filters) with an RBF SVM."""
    logging.basicConfig(level=log_level.upper(), format="%(levelname)s %(name)s: %(message)s")


@main.command("select")
@_dataset_opts
@_opt("method", "method", type=click.Choice(METHODS, case_sensitive=False), default="mrms")
@_opt("k", "k", type=click.IntRange(min=1), required=True, help="Number of bands to select.")
@_selector_opts
@_opt("out", "out", type=click.Path(file_okay=False), default=".", help="Output directory.")
def cmd_select(cube, labels, method, k, levels, beta, threshold, out):
    """Greedy band selection; writes a text trace and a JSON trace."""
    try:
        hc, gt, name = _load(cube, labels)
        cfg = SelectorConfig(method, k, beta, threshold, levels)
        trace = select_for(hc, gt, cfg)
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        base = f"{name}_{cfg.method}_k{k}"
        txt = outdir / f"{base}.trace.txt"
        datasets.write_trace(trace, txt)
        datasets.trace_to_json(trace, cfg, outdir / f"{base}.trace.json")
    except (ValueError, OSError) as e:
        _fail(e)
    click.echo(str(txt))


@main.command("classify")
@_dataset_opts
@_opt("method", "method", type=click.Choice(METHODS, case_sensitive=False), default="mrms")
@_opt("k", "k", type=click.IntRange(min=1), required=True, help="Number of bands to use.")
@_opt("trace", "trace", type=click.Path(exists=True, dir_okay=False), default=None,
      help="Use this text trace instead of selecting inline.")
@_selector_opts
@_svm_opts
@_opt("out", "out", type=click.Path(file_okay=False), default=".", help="Output directory.")
def cmd_classify(cube, labels, method, k, trace, levels, beta, threshold, train_frac, seed,
                 svm_c, svm_gamma, grid_search, out):
    """Select (or load) k bands, train the SVM, write a JSON report and a PPM map."""
    try:
        hc, gt, name = _load(cube, labels)
        cfg = SelectorConfig(method, k, beta, threshold, levels)
        if trace:
            from .selectors import SelectionTrace
            bands = datasets.read_trace(Path(trace).read_text())
            if len(bands) < k:
                raise ValueError(f"trace {trace} has {len(bands)} bands, need {k}")
            tr = SelectionTrace(cfg.method, bands)
        else:
            tr = select_for(hc, gt, cfg)
        params = SvmParams(c=svm_c, gamma=svm_gamma)
        report, result = run_cell(hc, gt, tr, cfg, k, train_frac, seed, name, params, grid_search)
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        base = cell_name(name, cfg.method, k, train_frac, seed)
        report_path = outdir / f"{base}.json"
        datasets.write_report(report, report_path)
        datasets.write_bytes_atomic(outdir / f"{base}.ppm",
                                    metrics.render_map(result.predictions, gt))
    except (ValueError, OSError) as e:
        _fail(e)
    m = report.metrics
    click.echo(f"OA={m['oa']:.4f} AA={m['aa']:.4f} kappa={m['kappa']:.4f} "
               f"SP={m['specificity']:.4f} -> {report_path}")


def _csv_list(kind):
    def convert(ctx, param, value):
        if value is None:
            return None
        items = [v.strip() for v in str(value).split(",") if v.strip()]
        if not items:
            raise click.BadParameter("empty list")
        if kind is int:
            try:
                out = [int(v) for v in items]
            except ValueError:
                raise click.BadParameter(f"expected integers, got {value!r}") from None
            if min(out) < 1:
                raise click.BadParameter("k values must be >= 1")
            return sorted(set(out))
        bad = [v for v in items if v.lower() not in METHODS]
        if bad:
            raise click.BadParameter(f"unknown method(s) {', '.join(bad)}; "
                                     f"choose from {', '.join(METHODS)}")
        return [v.lower() for v in items]
    return convert


@main.command("sweep")
@_dataset_opts
@_opt("method", "methods", default="mrms", callback=_csv_list(str),
      help="Comma-separated methods.")
@_opt("k-list", "k_list", required=True, callback=_csv_list(int),
      help="Comma-separated band counts.")
@_selector_opts
@_svm_opts
@_opt("out", "out", type=click.Path(file_okay=False), default=".", help="Output directory.")
def cmd_sweep(cube, labels, methods, k_list, levels, beta, threshold, train_frac, seed,
              svm_c, svm_gamma, grid_search, out):
    """OA/AA/kappa/SP versus band count for each method, as CSV plus one report per cell."""
    rows = []
    try:
        hc, gt, name = _load(cube, labels)
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        params = SvmParams(c=svm_c, gamma=svm_gamma)
        for method in methods:
            cfg = SelectorConfig(method, max(k_list), beta, threshold, levels)
            trace = select_for(hc, gt, cfg)
            for k in k_list:
                report, _ = run_cell(hc, gt, trace, cfg, k, train_frac, seed, name, params,
                                     grid_search)
                base = cell_name(name, method, k, train_frac, seed)
                datasets.write_report(report, outdir / f"{base}.json")
                m = report.metrics
                rows.append([method, k, f"{train_frac:.6f}", seed] +
                            [f"{m[key]:.6f}" for key in ("oa", "aa", "kappa", "specificity")])
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        w.writerows(rows)
        csv_path = outdir / f"{name}_sweep.csv"
        datasets._write_atomic(csv_path, buf.getvalue())
    except (ValueError, OSError) as e:
        _fail(e)
    click.echo(str(csv_path))


@main.command("synth")
@click.option("--kind", type=click.Choice(["synergy", "informative"]), default="synergy",
              help="synergy: XOR benchmark cube; informative: planted class bands plus noise.")
@click.option("--rows", type=click.IntRange(min=1), default=10)
@click.option("--cols", type=click.IntRange(min=1), default=10)
@click.option("--informative", type=click.IntRange(min=1), default=4)
@click.option("--noise-bands", type=click.IntRange(min=0), default=6)
@click.option("--noise-level", type=float, default=0.3)
@click.option("--classes", type=click.IntRange(min=2), default=4)
@_opt("seed", "seed", type=int, default=0)
@_opt("out", "out", type=click.Path(file_okay=False), default=".")
def cmd_synth(kind, rows, cols, informative, noise_bands, noise_level, classes, seed, out):
    """Write a synthetic cube and label raster as ENVI files."""
    if kind == "synergy":
        cube, gt = datasets.synergy_benchmark(rows, cols, seed=seed)
    else:
        spec = datasets.SynthSpec(rows, cols, [datasets.Informative() for _ in range(informative)],
                                  noise_bands=noise_bands, noise_level=noise_level,
                                  n_classes=classes, seed=seed)
        cube, gt = datasets.synth_cube(spec)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    c = datasets.save_envi(cube, outdir / f"{kind}_cube")
    g = datasets.save_labels(gt, outdir / f"{kind}_gt")
    click.echo(f"{c}\n{g}")


if __name__ == "__main__":
    main()
