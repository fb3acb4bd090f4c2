"""Command-line interface: ``netrec eval | crowd | report | inspect``.

Settings resolve as defaults < config file (``key = value`` text or JSON)
< command-line flags. Every result file is written next to a
``manifest.json`` holding the resolved settings, the dataset checksum and
the tool version; passing that manifest back as ``--config`` repeats the
run and reproduces the result files.
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import math
import sys
from pathlib import Path

import click

from . import __version__
from ._backend import set_backend
from .crowd import SOLVERS, CrowdRow, dense_subset, precision_gains, run_crowd
from .evaluation import RANK_NORMALIZATIONS, ParameterGrid, default_grid, run_many
from .ingest import file_checksum, load_dataset
from .metrics import MetricReport, read_table, write_table
from .recommenders import UnknownMethodError, get_kernel, method_names

logger = logging.getLogger("netrec")

EVAL_DEFAULTS = {
    "data": None,
    "min_rating": 3.0,
    "delimiter": "auto",
    "division": "triple",
    "L": 50,
    "seeds": [0],
    "methods": None,  # None = every registered method
    "grid": {},
    "learning_fraction": 0.10,
    "probe_fraction": 0.10,
    "rank_normalization": "candidates",
    "batch_size": None,
    "backend": "auto",
    "markdown": False,
    "out": "results",
}

CROWD_DEFAULTS = {
    "data": None,
    "min_rating": 3.0,
    "delimiter": "auto",
    "method": "ProbS-HeatS",
    "params": {},
    "m": [2, 3, 4, 5, 6, 8, 10, 15, 20, 30, 50, 100, "inf"],
    "solvers": list(SOLVERS),
    "seeds": [0],
    "L": 1,
    "subset_items": 500,
    "subset_min_links": 10,
    "pool_size": 500,
    "T0": 1e4,
    "cooling": 0.95,
    "macro_cap": 1000,
    "one_user_moves": False,
    "backend": "auto",
    "out": "crowd",
}

# columns where a lower value is better; the others are maximised
_LOWER_IS_BETTER = {"r", "I", "N"}


def _config_value(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except ValueError:
        pass
    if "," in text:
        return [_config_value(t) for t in text.split(",") if t.strip()]
    return text


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Values are read as JSON when possible, comma-separated values become
    lists, anything else stays a string. ``grid.NAME = LO:HI:STEP`` sets a
    search range.
    """
    cfg: dict = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.BadParameter(f"line {n}: expected 'key = value'", param_hint="--config")
        key, value = (t.strip() for t in line.split("=", 1))
        key = key.replace("-", "_")
        if key.startswith("grid."):
            name, rng = ParameterGrid.parse_override(f"{key[5:]}={value}")
            cfg.setdefault("grid", {})[name] = list(rng)
            continue
        val = _config_value(value)
        if key in ("seeds", "methods", "solvers", "m") and not isinstance(val, list):
            val = [val]
        cfg[key] = val
    return cfg


def _load_config(path: str | None) -> dict:
    """Settings from a JSON object, a manifest, or ``key = value`` text."""
    if not path:
        return {}
    text = Path(path).read_text(encoding="utf-8")
    try:
        cfg = json.loads(text)
    except ValueError:
        return parse_config_text(text)
    if not isinstance(cfg, dict):
        raise click.BadParameter("config must be a JSON object", param_hint="--config")
    return dict(cfg.get("config", cfg))  # a manifest carries its settings under "config"


def _resolve(defaults: dict, config_path: str | None, flags: dict) -> dict:
    cfg = dict(defaults)
    file_cfg = _load_config(config_path)
    unknown = sorted(set(file_cfg) - set(defaults))
    if unknown:
        raise click.BadParameter(f"unknown config keys: {', '.join(unknown)}", param_hint="--config")
    cfg.update(file_cfg)
    cfg.update({k: v for k, v in flags.items() if v is not None})
    if not cfg.get("data"):
        raise click.UsageError("no dataset: pass --data or set 'data' in the config")
    return cfg


def _csv(text: str | None, cast=str) -> list | None:
    if text is None:
        return None
    return [cast(t.strip()) for t in text.split(",") if t.strip()]


def _m_value(v) -> float:
    if isinstance(v, str) and v.strip().lower() in ("inf", "infinity", "none"):
        return math.inf
    return float(v)


def _m_json(v: float):
    return "inf" if math.isinf(v) else int(v)


def _write_manifest(out: Path, command: str, cfg: dict, started: str, extra: dict | None = None) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "config": cfg,
        "seeds": cfg.get("seeds"),
        "dataset_sha256": file_checksum(cfg["data"]),
        "started": started,
        "finished": _now(),
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _check_methods(names: list[str]) -> list[str]:
    out = []
    for n in names:
        try:
            out.append(get_kernel(n).name)
        except UnknownMethodError as exc:
            raise click.BadParameter(str(exc), param_hint="--methods") from None
    return out


def _grid_for(method: str, overrides: dict) -> ParameterGrid:
    grid = default_grid(method)
    relevant = {k: tuple(v) for k, v in overrides.items() if k in grid.ranges}
    return grid.with_overrides(relevant) if relevant else grid


def markdown_table(reports: list[MetricReport], L: int) -> str:
    """Markdown rendering with the best value of each metric column in bold."""
    cols = ["method", "n_params", "params", "r", f"P@{L}", f"R@{L}", f"I@{L}", f"D@{L}", f"N@{L}"]
    best = {}
    for m in MetricReport.METRICS:
        vals = [getattr(r, m) for r in reports if not math.isnan(getattr(r, m))]
        if vals:
            best[m] = min(vals) if m in _LOWER_IS_BETTER else max(vals)
    lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
    for r in reports:
        cells = [r.method, str(r.n_params), r.params or "-"]
        for m in MetricReport.METRICS:
            v = getattr(r, m)
            txt = "nan" if math.isnan(v) else (f"{v:.1f}" if m == "N" else f"{v:.4f}")
            cells.append(f"**{txt}**" if m in best and v == best[m] else txt)
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


@click.group()
@click.version_option(__version__, prog_name="netrec")
@click.option("-v", "--verbose", count=True, help="Repeat for more log output.")
def main(verbose: int) -> None:
    """Network-based recommendation: evaluation and crowd avoidance."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


@main.command("eval")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="JSON config or manifest.")
@click.option("--data", type=click.Path(exists=True, dir_okay=False), help="Ratings file (user item rating ...).")
@click.option("--min-rating", type=float, help="Ratings below this are dropped [3].")
@click.option("--division", type=click.Choice(["double", "triple"]), help="Data division [triple].")
@click.option("--L", "L", type=click.IntRange(min=1), help="Recommendation list length [50].")
@click.option("--seeds", help="Comma-separated split seeds [0].")
@click.option("--methods", help="Comma-separated method names [all].")
@click.option("--grid", "grid", multiple=True, help="Search range override KEY=LO:HI:STEP (repeatable).")
@click.option("--rank-normalization", type=click.Choice(RANK_NORMALIZATIONS), help="Divide ranks by candidates or catalogue size.")
@click.option("--backend", type=click.Choice(["auto", "cython", "python"]), help="Compiled or pure-Python loops.")
@click.option("--markdown/--no-markdown", default=None, help="Also write results.md.")
@click.option("--out", type=click.Path(file_okay=False), help="Output directory [results].")
def cmd_eval(config_path, data, min_rating, division, L, seeds, methods, grid, rank_normalization, backend, markdown, out):
    """Evaluate methods and write one TSV row per method."""
    started = _now()
    grid_over = None
    if grid:
        grid_over = {}
        for g in grid:
            try:
                name, rng = ParameterGrid.parse_override(g)
            except ValueError as exc:
                raise click.BadParameter(str(exc), param_hint="--grid") from None
            grid_over[name] = list(rng)
    flags = {
        "data": data, "min_rating": min_rating, "division": division, "L": L,
        "seeds": _csv(seeds, int), "methods": _csv(methods), "grid": grid_over,
        "rank_normalization": rank_normalization, "backend": backend, "markdown": markdown, "out": out,
    }
    cfg = _resolve(EVAL_DEFAULTS, config_path, flags)
    names = _check_methods(cfg["methods"] if cfg["methods"] is not None else method_names())
    cfg["methods"] = names
    set_backend(cfg["backend"])
    ds = load_dataset(cfg["data"], cfg["min_rating"], cfg["delimiter"])
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    reports, learned = [], {}
    for name in names:
        kw = dict(L=cfg["L"], n_users=ds.n_users, n_items=ds.n_items, batch_size=cfg["batch_size"],
                  normalization=cfg["rank_normalization"], probe_fraction=cfg["probe_fraction"])
        if cfg["division"] == "triple":
            kw["learning_fraction"] = cfg["learning_fraction"]
        kw["grid"] = _grid_for(name, cfg["grid"]) if get_kernel(name).free_params else None
        try:
            run = run_many(ds.links, name, cfg["seeds"], cfg["division"], **kw)
        except ValueError as exc:
            raise click.ClickException(f"{name}: cannot evaluate ({exc})") from None
        reports.append(run.average)
        learned[name] = run.learned
        click.echo(f"{name}: r={run.average.r:.4f} P={run.average.P:.4f} ({run.seconds:.1f}s)", err=True)
    (outdir / "results.tsv").write_text(write_table(reports, cfg["L"]), encoding="utf-8")
    if cfg["markdown"]:
        (outdir / "results.md").write_text(markdown_table(reports, cfg["L"]), encoding="utf-8")
    _write_manifest(outdir, "eval", cfg, started, {"learned": learned})
    click.echo(str(outdir / "results.tsv"))


@main.command("crowd")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="JSON config or manifest.")
@click.option("--data", type=click.Path(exists=True, dir_okay=False), help="Ratings file.")
@click.option("--min-rating", type=float, help="Ratings below this are dropped [3].")
@click.option("--method", help="Method producing the ranks [ProbS-HeatS].")
@click.option("--m", "m", help="Comma-separated occupancy limits; 'inf' for none.")
@click.option("--solvers", help=f"Comma-separated subset of {','.join(SOLVERS)} (loc, ha accepted).")
@click.option("--seeds", help="Comma-separated split seeds [0].")
@click.option("--L", "L", type=click.IntRange(min=1), help="Items per user [1].")
@click.option("--subset-items", type=click.IntRange(min=0), help="Keep this many most-linked items; 0 keeps all [500].")
@click.option("--subset-min-links", type=click.IntRange(min=0), help="Minimum links of a kept user inside the subset [10].")
@click.option("--pool-size", type=click.IntRange(min=1), help="Initial candidate pool per user for the exact solver [500].")
@click.option("--T0", "T0", type=float, help="Initial annealing temperature [1e4].")
@click.option("--cooling", type=float, help="Temperature factor per macro step [0.95].")
@click.option("--macro-cap", type=click.IntRange(min=1), help="Maximum annealing macro steps [1000].")
@click.option("--backend", type=click.Choice(["auto", "cython", "python"]))
@click.option("--out", type=click.Path(file_okay=False), help="Output directory [crowd].")
def cmd_crowd(config_path, data, min_rating, method, m, solvers, seeds, L, subset_items, subset_min_links,
              pool_size, T0, cooling, macro_cap, backend, out):
    """Precision and n_eff versus the occupancy limit m for each solver."""
    started = _now()
    flags = {
        "data": data, "min_rating": min_rating, "method": method, "m": _csv(m),
        "solvers": _csv(solvers), "seeds": _csv(seeds, int), "L": L, "subset_items": subset_items,
        "subset_min_links": subset_min_links, "pool_size": pool_size, "T0": T0, "cooling": cooling,
        "macro_cap": macro_cap, "backend": backend, "out": out,
    }
    cfg = _resolve(CROWD_DEFAULTS, config_path, flags)
    try:
        m_values = [_m_value(v) for v in cfg["m"]]
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--m") from None
    cfg["m"] = [_m_json(v) for v in m_values]
    _check_methods([cfg["method"].split("(")[0]])
    set_backend(cfg["backend"])
    ds = load_dataset(cfg["data"], cfg["min_rating"], cfg["delimiter"])
    links, nu, ni = ds.links, ds.n_users, ds.n_items
    if cfg["subset_items"]:
        links, users, items = dense_subset(links, cfg["subset_items"], cfg["subset_min_links"])
        nu, ni = len(users), len(items)
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    rows, gains, learned = [], {}, {}
    for seed in cfg["seeds"]:
        try:
            res = run_crowd(
                links, m_values, cfg["solvers"], cfg["method"], cfg["params"] or None, seed=seed, L=cfg["L"],
                n_users=nu, n_items=ni, pool_size=cfg["pool_size"], T0=cfg["T0"], cooling=cfg["cooling"],
                macro_cap=cfg["macro_cap"], one_user_moves=cfg["one_user_moves"],
            )
        except ValueError as exc:
            raise click.ClickException(str(exc)) from None
        rows.extend(res.rows)
        learned[str(seed)] = res.params
        if any(r.solver == "mpo" and math.isinf(r.m) for r in res.rows):
            gains[str(seed)] = {k: {kk: _m_json(vv) if kk == "m" else vv for kk, vv in v.items()}
                                for k, v in precision_gains(res.rows).items()}
    text = "\n".join([CrowdRow.tsv_header()] + [r.tsv_row() for r in rows]) + "\n"
    (outdir / "crowd.tsv").write_text(text, encoding="utf-8")
    _write_manifest(outdir, "crowd", cfg, started, {"learned": learned, "gains": gains,
                                                    "subset": {"users": nu, "items": ni, "links": int(len(links))}})
    click.echo(str(outdir / "crowd.tsv"))


@main.command("report")
@click.argument("table", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), help="Write markdown here instead of stdout.")
def cmd_report(table, out):
    """Render a results TSV as markdown, best value per column in bold."""
    text = Path(table).read_text(encoding="utf-8")
    try:
        reports = read_table(text)
    except ValueError as exc:
        raise click.ClickException(f"{table}: {exc}") from None
    header = text.splitlines()[0].split("\t")
    md = markdown_table(reports, int(header[4][2:]))
    if out:
        Path(out).write_text(md, encoding="utf-8")
    else:
        click.echo(md, nl=False)


@main.command("inspect")
@click.option("--data", "paths", multiple=True, required=True, type=click.Path(exists=True, dir_okay=False),
              help="Ratings file (repeatable).")
@click.option("--min-rating", type=float, default=3.0, show_default=True)
def cmd_inspect(paths, min_rating):
    """Dataset statistics: U, I, L, density and mean/max degrees."""
    cols = ["dataset", "U", "I", "L", "density", "E(k_user)", "M(k_user)", "E(k_item)", "M(k_item)"]
    click.echo("\t".join(cols))
    for p in paths:
        s = load_dataset(p, min_rating).graph().summary()
        click.echo("\t".join([
            Path(p).stem if Path(p).stem not in ("u", "data", "ratings") else Path(p).parent.name,
            str(s["U"]), str(s["I"]), str(s["L"]), f"{s['density']:.3e}",
            f"{s['mean_k_user']:.1f}", str(s["max_k_user"]), f"{s['mean_k_item']:.1f}", str(s["max_k_item"]),
        ]))


if __name__ == "__main__":  # pragma: no cover
    main()
