"""Config files, experiment sweeps, CSV output and plots."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
import typing
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from vrarcade.engine import SCHEMES, RunConfig, Simulation

log = logging.getLogger(__name__)

CSV_HEADER = [
    "axis",
    "axis_value",
    "scheme",
    "seed",
    "mean_cm_ms",
    "p90_cm_ms",
    "mean_cp_ms",
    "mean_e2e_ms",
    "hd_ratio",
]
AXES = ("players", "mmaps")


class ConfigError(ValueError):
    pass


class SweepError(RuntimeError):
    pass


# -- config ---------------------------------------------------------------


def _coerce(value, hint, path: str):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin in (typing.Union, getattr(__import__("types"), "UnionType", None)):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], path)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    return value


def _build(cls, data, path: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - names)
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"{where}{unknown[0]}: unknown field")
    kwargs = {}
    for name, value in data.items():
        hint = hints[name]
        sub = f"{path}.{name}" if path else name
        if dataclasses.is_dataclass(hint):
            kwargs[name] = _build(hint, value, sub)
        else:
            kwargs[name] = _coerce(value, hint, sub)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except ValueError as exc:
        msg = str(exc)
        if path:
            msg = f"{path}.{msg}" if ":" in msg.split()[0] else f"{path}: {msg}"
        raise ConfigError(msg) from None


def config_from_dict(data) -> RunConfig:
    return _build(RunConfig, data, "")


def config_to_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def load_config(path) -> RunConfig:
    """Read a YAML run config; missing fields take their defaults."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        problem = getattr(exc, "problem", None) or str(exc).splitlines()[0]
        raise ConfigError(f"{path}: parse error at {where}: {problem}") from None
    return config_from_dict(data)


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# vrarcade run configuration\n")
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=False, default_flow_style=False)


# -- sweeps ---------------------------------------------------------------


@dataclass
class SweepSpec:
    axis: str
    values: list[int]
    schemes: list[str] = field(default_factory=lambda: list(SCHEMES))
    seeds: list[int] = field(default_factory=lambda: [0])
    template: RunConfig = field(default_factory=RunConfig)

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"axis: expected one of {AXES}, got {self.axis!r}")
        if not self.values:
            raise ConfigError("values: must be non-empty")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ConfigError("values: must be strictly increasing")
        if not self.seeds:
            raise ConfigError("seeds: must be non-empty")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad or not self.schemes:
            raise ConfigError(f"schemes: unknown scheme {bad[0] if bad else '(none)'}")

    def cell_config(self, value: int, scheme: str, seed: int) -> RunConfig:
        t = self.template
        if self.axis == "players":
            scenario = replace(t.scenario, n_players=value)
            fog = t.fog
        else:
            # servers follow the number of mmAPs on this axis
            scenario = replace(t.scenario, n_mmaps=value)
            fog = replace(t.fog, n_servers=value)
        return replace(t, scheme=scheme, seed=seed, scenario=scenario, fog=fog)

    def cells(self):
        for v in self.values:
            for scheme in sorted(self.schemes):
                for seed in self.seeds:
                    yield v, scheme, seed


def _run_cell(spec: SweepSpec, value: int, scheme: str, seed: int):
    try:
        report = Simulation(spec.cell_config(value, scheme, seed)).run()
    except Exception as exc:  # reported with the cell coordinates
        return value, scheme, seed, None, f"{type(exc).__name__}: {exc}"
    return value, scheme, seed, report.summary(), None


def _ms(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x * 1e3:.6f}"


def run_sweep(spec: SweepSpec, out_path, *, jobs: int = 1, summary_path=None) -> list[dict]:
    """Run every (value, scheme, seed) cell and write the sweep CSV."""
    cells = list(spec.cells())
    if jobs > 1:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=jobs)(delayed(_run_cell)(spec, *c) for c in cells)
    else:
        results = [_run_cell(spec, *c) for c in cells]
    for value, scheme, seed, _, err in results:
        if err is not None:
            raise SweepError(f"run failed for {spec.axis}={value} scheme={scheme} seed={seed}: {err}")
    results.sort(key=lambda r: (r[0], r[1], r[2]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for value, scheme, seed, s, _ in results:
        w.writerow([
            spec.axis, value, scheme, seed,
            _ms(s["mean_cm"]), _ms(s["p90_cm"]), _ms(s["mean_cp"]), _ms(s["mean_e2e"]),
            f"{s['hd_ratio']:.6f}",
        ])
    Path(out_path).write_text(buf.getvalue(), encoding="utf-8")
    if summary_path is not None:
        with open(summary_path, "w", encoding="utf-8") as fh:
            for value, scheme, seed, s, _ in results:
                cfg = spec.cell_config(value, scheme, seed)
                for metric in ("mean_cm", "p90_cm", "mean_cp", "mean_e2e", "hd_ratio", "n_frames", "n_hd"):
                    rec = {
                        "scheme": scheme,
                        "U": cfg.scenario.n_players,
                        "A": cfg.scenario.n_mmaps,
                        "seed": seed,
                        "metric": metric,
                        "value": s[metric],
                    }
                    fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return [r[3] for r in results]


# -- plots ----------------------------------------------------------------


def read_sweep_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ConfigError(f"{path}: row 1: bad header {header!r}")
        rows = []
        for n, raw in enumerate(reader, start=2):
            if len(raw) != len(CSV_HEADER):
                raise ConfigError(f"{path}: row {n}: expected {len(CSV_HEADER)} fields, got {len(raw)}")
            rec = dict(zip(CSV_HEADER, raw))
            try:
                rec["axis_value"] = int(rec["axis_value"])
                rec["seed"] = int(rec["seed"])
                for k in CSV_HEADER[4:]:
                    rec[k] = float(rec[k])
            except ValueError as exc:
                raise ConfigError(f"{path}: row {n}: {exc}") from None
            if rec["axis"] not in AXES or rec["scheme"] not in SCHEMES:
                raise ConfigError(f"{path}: row {n}: unknown axis or scheme")
            rows.append(rec)
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    return rows


def _seed_mean(rows, axis, scheme, key):
    xs = sorted({r["axis_value"] for r in rows if r["axis"] == axis and r["scheme"] == scheme})
    ys = []
    for x in xs:
        vals = [r[key] for r in rows if r["axis"] == axis and r["scheme"] == scheme and r["axis_value"] == x]
        vals = [v for v in vals if not math.isnan(v)]
        ys.append(sum(vals) / len(vals) if vals else float("nan"))
    return xs, ys


def emit_plots(csv_path, out_dir) -> list[Path]:
    """Comm-delay (mean dashed, 90th percentile solid) and compute-delay figures per axis."""
    rows = read_sweep_csv(csv_path)
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    xlabel = {"players": "number of players", "mmaps": "number of mmAPs (= servers)"}
    written = []
    for axis in sorted({r["axis"] for r in rows}):
        schemes = sorted({r["scheme"] for r in rows if r["axis"] == axis})
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for i, scheme in enumerate(schemes):
            color = f"C{i}"
            xs, mean = _seed_mean(rows, axis, scheme, "mean_cm_ms")
            _, p90 = _seed_mean(rows, axis, scheme, "p90_cm_ms")
            ax.plot(xs, mean, "--o", color=color, label=f"{scheme} mean")
            ax.plot(xs, p90, "-s", color=color, label=f"{scheme} p90")
        ax.set_xlabel(xlabel[axis])
        ax.set_ylabel("communication delay (ms)")
        ax.legend(fontsize=7)
        ax.grid(alpha=0.3)
        path = out_dir / f"{axis}_comm_delay.png"
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

        fig, ax = plt.subplots(figsize=(5, 3.5))
        for i, scheme in enumerate(schemes):
            xs, cp = _seed_mean(rows, axis, scheme, "mean_cp_ms")
            ax.plot(xs, cp, "-o", color=f"C{i}", label=scheme)
        ax.set_xlabel(xlabel[axis])
        ax.set_ylabel("mean computing delay (ms)")
        ax.legend(fontsize=7)
        ax.grid(alpha=0.3)
        path = out_dir / f"{axis}_compute_delay.png"
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


# -- entry point ----------------------------------------------------------


def _parse_sweep(text: str):
    axis, sep, vals = text.partition("=")
    if not sep:
        raise ConfigError(f"--sweep: expected axis=v1,v2,..., got {text!r}")
    try:
        values = [int(v) for v in vals.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--sweep: values must be integers, got {vals!r}") from None
    return axis.strip(), values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vrarcade", description="VR arcade edge-rendering simulator")
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--sweep", help="players=8,16,32,64 or mmaps=4,8,16")
    p.add_argument("--schemes", default=",".join(SCHEMES), help="comma-separated schemes")
    p.add_argument("--seeds", type=int, default=1, help="run seeds 0..N-1")
    p.add_argument("--slots", type=int, help="override total_slots")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--plots", action="store_true", help="also write figures")
    p.add_argument("--jobs", type=int, default=1, help="concurrent runs")
    p.add_argument("--print-config", action="store_true", help="print the effective config and exit")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.slots is not None:
            cfg = replace(cfg, total_slots=args.slots)
        if args.print_config:
            yaml.safe_dump(config_to_dict(cfg), sys.stdout, sort_keys=False)
            return 0
        if args.seeds < 1:
            raise ConfigError("--seeds: must be at least 1")
        schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.sweep:
            axis, values = _parse_sweep(args.sweep)
            spec = SweepSpec(axis, values, schemes, list(range(args.seeds)), cfg)
            csv_path = out / f"sweep_{axis}.csv"
            run_sweep(spec, csv_path, jobs=args.jobs, summary_path=out / f"sweep_{axis}_summary.jsonl")
            print(csv_path)
            if args.plots:
                for path in emit_plots(csv_path, out):
                    print(path)
        else:
            for scheme in schemes:
                for seed in range(args.seeds):
                    if scheme not in SCHEMES:
                        raise ConfigError(f"--schemes: unknown scheme {scheme!r}")
                    rep = Simulation(replace(cfg, scheme=scheme, seed=seed)).run()
                    print(json.dumps({"seed": seed, **rep.summary()}, sort_keys=True))
    except (ConfigError, SweepError, OSError) as exc:
        print(f"error: {' '.join(str(exc).split())}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
