"""Command-line pipeline: build -> dd -> sample -> decode -> analyze -> fit -> report.

Every stage reads the files written by the previous ones from the output
directory, so each can be rerun on its own.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from ._svg import line_plot
from .circuits import ALPHAS, from_text, memory_circuit, to_text
from .dd import apply_strategy, optimize_dd, pulse_count
from .decoder import MatchingDecoder, DecodeResult, estimate_series, read_series, write_series
from .dem import build_dem, decompose_graphlike
from .experiment import DDAwareEvaluator, chi_sweep, ef_from_entries, point_seed
from .fitting import FitError, bootstrap, fit_model, stationarity_diagnostics
from .layout import build_device_graph, carve_patch, heron, load_patch, sublattices_of
from .noise import attach_noise, from_calibration, median_model, scale_chi, uniform_model
from .pauliframe import ShotBatch, sample_shots

STAGES = ["build", "dd", "sample", "decode", "analyze", "fit"]
ARMS = ("DD", "noDD")
TOKEN = {"0": "z0", "1": "z1", "+": "xp", "-": "xm"}

DEFAULTS = {
    "d_x": 3, "d_z": 3, "anchor": None, "sublattice": None,
    "device": "heron",
    "alphas": list(ALPHAS),
    "n_max": 9, "shots": 3000, "seed": 0,
    "dd_arms": ["DD", "noDD"], "dd_shots": 10000, "dd_n": 1, "p_pulse": 1e-4,
    "noise": {"source": "uniform", "p": 1e-3},
    "chi": 1.0,
    "chi_grid": [round(1.0 + 0.1 * k, 1) for k in range(16)],
    "sweep_patches": [[3, 3], [5, 5]],
    "bootstrap": 200,
    "out": "run",
}


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    pass


# -- configuration ------------------------------------------------------------

def validate_config(cfg: dict) -> dict:
    unknown = set(cfg) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    c = {**DEFAULTS, **cfg}

    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    for k in ("d_x", "d_z", "n_max", "shots", "seed", "dd_shots", "dd_n", "bootstrap"):
        need(isinstance(c[k], int) and not isinstance(c[k], bool), f"{k} must be an integer")
    need(c["d_x"] >= 2 and c["d_z"] >= 2, "distances must be >= 2")
    need(c["n_max"] >= 0, "n_max must be >= 0")
    need(c["shots"] >= 1 and c["dd_shots"] >= 1, "shots must be >= 1")
    need(c["bootstrap"] >= 2, "bootstrap must be >= 2")
    need(c["anchor"] is None or isinstance(c["anchor"], int), "anchor must be a qubit id or null")
    need(c["sublattice"] is None or isinstance(c["sublattice"], int), "sublattice must be an index or null")
    need(isinstance(c["alphas"], list) and c["alphas"] and set(c["alphas"]) <= set(ALPHAS),
         f"alphas must be a non-empty subset of {list(ALPHAS)}")
    need(isinstance(c["dd_arms"], list) and set(c["dd_arms"]) <= set(ARMS), f"dd_arms must be a subset of {ARMS}")
    need(c["device"] == "heron" or (isinstance(c["device"], list) and len(c["device"]) == 3),
         'device must be "heron" or [rows, row_length, phase]')
    nz = c["noise"]
    need(isinstance(nz, dict) and nz.get("source") in ("uniform", "median", "calibration"),
         "noise.source must be uniform, median or calibration")
    if nz["source"] != "uniform":
        need(isinstance(nz.get("path"), str), f"noise source {nz['source']} needs a path")
    need(isinstance(c["chi"], (int, float)) and c["chi"] >= 0, "chi must be >= 0")
    need(isinstance(c["chi_grid"], list) and all(isinstance(x, (int, float)) for x in c["chi_grid"]),
         "chi_grid must be a list of numbers")
    need(isinstance(c["sweep_patches"], list) and len(c["sweep_patches"]) == 2,
         "sweep_patches must list two [d_x, d_z] pairs")
    return c


def load_config(path=None, **overrides) -> dict:
    cfg = {}
    if path:
        with open(path) as fh:
            cfg = json.load(fh)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return validate_config(cfg)


# -- helpers ------------------------------------------------------------------

def _device(cfg):
    if cfg["device"] == "heron":
        return heron()
    r, n, ph = cfg["device"]
    return build_device_graph(r, n, phase=ph)


def _patch(cfg, g, d_x=None, d_z=None):
    p = carve_patch(g, d_x or cfg["d_x"], d_z or cfg["d_z"], anchor=cfg["anchor"])
    if cfg["sublattice"] is not None and d_x is None:
        subs = sublattices_of(p)
        if not 0 <= cfg["sublattice"] < len(subs):
            raise ConfigError(f"sublattice index {cfg['sublattice']} out of range ({len(subs)} found)")
        p = subs[cfg["sublattice"]]
    return p


def _base_model(cfg, g):
    nz = cfg["noise"]
    if nz["source"] == "uniform":
        kw = {k: nz[k] for k in ("p", "t1", "t2") if k in nz}
        return uniform_model(g.qubits, g.edges, **kw)
    cal = from_calibration(nz["path"])
    if nz["source"] == "median":
        return median_model(cal, g.qubits, g.edges)
    return cal


def _model(cfg, g):
    return scale_chi(_base_model(cfg, g), cfg["chi"])


def _load_model(out: Path):
    from dataclasses import replace
    d = json.loads((out / "noise.json").read_text())
    m = from_calibration(out / "noise.json")
    return replace(m, dd_aware=d.get("dd_aware", False), p_pulse=d.get("p_pulse", 1e-4))


def _circ_path(out, arm, alpha, n):
    return out / "circuits" / f"{arm}_{TOKEN[alpha]}_N{n}.txt"


def _shot_path(out, arm, alpha, n):
    return out / "shots" / f"{arm}_{TOKEN[alpha]}_N{n}.bin"


def _arms(cfg):
    return [a for a in ARMS if a in cfg["dd_arms"]]


def _points(cfg):
    for arm in _arms(cfg):
        for a in cfg["alphas"]:
            for n in range(cfg["n_max"] + 1):
                yield arm, a, n


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# -- stages -------------------------------------------------------------------

def stage_layout(cfg, out: Path) -> list:
    g = _device(cfg)
    p = _patch(cfg, g)
    files = [_write(out / "device.json", json.dumps(g.to_json(), indent=1))]
    p.save(out / "patch.json")
    files.append(out / "patch.json")
    return files


def stage_build(cfg, out: Path) -> list:
    files = stage_layout(cfg, out)
    g = _device(cfg)
    p = load_patch(out / "patch.json")
    m = _model(cfg, g)
    m.covers(p.qubits, [])
    nj = m.to_json()
    nj.update(dd_aware=True, p_pulse=cfg["p_pulse"])
    files.append(_write(out / "noise.json", json.dumps(nj, indent=1)))
    dur = m.durations()
    for a in cfg["alphas"]:
        for n in range(cfg["n_max"] + 1):
            files.append(_write(_circ_path(out, "noDD", a, n), to_text(memory_circuit(p, a, n, dur))))
    return files


def stage_dd(cfg, out: Path, no_dd: bool = False) -> list:
    m = _load_model(out)
    arms = _arms(cfg)
    summary = {"arms": arms, "strategies": {}}
    files = []
    if "DD" in arms and not no_dd:
        ev = DDAwareEvaluator(m, cfg["dd_shots"], cfg["seed"], cfg["p_pulse"])
        for a in cfg["alphas"]:
            n_opt = min(cfg["dd_n"], cfg["n_max"])
            c0 = from_text(_circ_path(out, "noDD", a, n_opt).read_text())
            opt, strat = optimize_dd(c0, ev)
            files.append(_write(out / "dd" / f"strategy_{TOKEN[a]}.json", strat.to_json()))
            summary["strategies"][a] = {"passes": [list(p) for p in strat.passes],
                                        "trace": opt.meta["dd_trace"], "optimized_at_N": n_opt,
                                        "pulses_per_cycle": pulse_count(opt) / (n_opt + 1)}
            for n in range(cfg["n_max"] + 1):
                c = from_text(_circ_path(out, "noDD", a, n).read_text())
                files.append(_write(_circ_path(out, "DD", a, n), to_text(apply_strategy(c, strat))))
    elif "DD" in arms:
        # --no-dd: the DD arm carries the bare circuits
        summary["disabled"] = True
        for a in cfg["alphas"]:
            for n in range(cfg["n_max"] + 1):
                files.append(_write(_circ_path(out, "DD", a, n), _circ_path(out, "noDD", a, n).read_text()))
    files.insert(0, _write(out / "dd" / "summary.json", json.dumps(summary, indent=1)))
    return files


def stage_sample(cfg, out: Path) -> list:
    m = _load_model(out)
    files = []
    for arm, a, n in _points(cfg):
        c = from_text(_circ_path(out, arm, a, n).read_text())
        batch = sample_shots(attach_noise(c, m), cfg["shots"], point_seed(cfg["seed"], arm, a, n))
        path = _shot_path(out, arm, a, n)
        path.parent.mkdir(parents=True, exist_ok=True)
        batch.save(path)
        files.append(path)
    return files


def stage_decode(cfg, out: Path) -> list:
    m = _load_model(out)
    label = f"({cfg['d_x']},{cfg['d_z']})"
    rows = []
    for arm, a, n in _points(cfg):
        c = from_text(_circ_path(out, arm, a, n).read_text())
        dec = MatchingDecoder(decompose_graphlike(build_dem(attach_noise(c, m))))
        batch = ShotBatch.load(_shot_path(out, arm, a, n))
        res = DecodeResult.from_shots(dec, batch)
        rows.append({"N": n, "alpha": a, "failures": int(res.failures.sum()),
                     "shots": batch.shot_count, "dd_arm": arm, "patch": label})
    path = out / "series.csv"
    write_series(estimate_series(rows), path)
    return [path]


def _groups(entries):
    g = {}
    for e in entries:
        g.setdefault((e.patch, e.dd_arm), []).append(e)
    return g


def analyze_entries(entries, out: Path, tag: str = "") -> list:
    files = []
    notes = {}
    for (patch, arm), es in sorted(_groups(entries).items()):
        key = f"{tag}{arm}"
        try:
            ef, n = ef_from_entries(es)
        except Exception as exc:  # noqa: BLE001 - recorded, not fatal
            notes[key] = [f"EF unavailable: {exc}"]
            continue
        notes[key] = n
        path = out / f"ef_{key}.csv"
        ef.to_csv(path)
        files.append(path)
    files.append(_write(out / f"analyze{tag and '_' + tag.rstrip('_')}.json",
                        json.dumps(notes, indent=1, sort_keys=True)))
    return files


def stage_analyze(cfg, out: Path) -> list:
    return analyze_entries(read_series(out / "series.csv"), out)


FIT_FIELDS = ["patch", "dd_arm", "alpha", "order", "eps", "eps_std", "a", "b", "aic", "rss", "n",
              "stationary"]


def fit_entries(entries, path: Path, replicates: int = 200, seed: int = 0) -> Path:
    rows = []
    for (patch, arm), es in sorted(_groups(entries).items()):
        for a in ALPHAS:
            pts = sorted((e.N, e.p, e.shots) for e in es if e.alpha == a)
            if not pts:
                continue
            N = np.array([x[0] for x in pts], float)
            p = np.array([x[1] for x in pts], float)
            shots = np.array([x[2] for x in pts])
            fits = {}
            for k in (1, 2, 3):
                try:
                    fits[k] = fit_model(N, p, k)
                except FitError:
                    pass
            if not fits:
                continue
            best = min(fits, key=lambda k: (round(fits[k].aic, 9), k))
            bs = bootstrap(N, p, shots, best, replicates, point_seed(seed, patch, arm, a))
            try:
                stat = "no" if stationarity_diagnostics(N, p).flags else "yes"
            except (ValueError, FitError):
                stat = "n/a"
            rows.append([patch, arm, a, best, repr(float(bs.eps)), repr(float(bs.std("eps"))),
                         repr(bs.params.get("a", 1.0)), repr(bs.params.get("b", 0.0)),
                         repr(float(bs.aic)), repr(float(bs.rss)), bs.n, stat])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FIT_FIELDS)
        w.writerows(rows)
    return path


def stage_fit(cfg, out: Path) -> list:
    return [fit_entries(read_series(out / "series.csv"), out / "fits.csv", cfg["bootstrap"], cfg["seed"])]


def stage_report(cfg, out: Path, stage_files: dict | None = None) -> list:
    entries = read_series(out / "series.csv")
    files = []
    for (patch, arm), es in sorted(_groups(entries).items()):
        ser = {}
        for a in ALPHAS:
            pts = sorted((e.N, e.p) for e in es if e.alpha == a)
            if pts:
                ser[f"|{a}>"] = ([x[0] for x in pts], [x[1] for x in pts])
        files.append(_write(out / "plots" / f"series_{arm}.svg",
                            line_plot(ser, f"{patch} {arm}", "cycles N", "logical error p(N)")))
    ef_ser = {}
    for arm in ARMS:
        path = out / f"ef_{arm}.csv"
        if path.exists():
            rows = list(csv.DictReader(path.open()))
            ef_ser[arm] = ([int(r["N"]) for r in rows], [float(r["F"]) for r in rows])
    if ef_ser:
        files.append(_write(out / "plots" / "ef.svg",
                            line_plot(ef_ser, "entanglement fidelity", "cycles N", "F_e(N)")))
    if stage_files is None:
        stage_files = _discover(cfg, out)
    manifest = {
        "version": __version__,
        "config": cfg,
        "seeds": {"run": cfg["seed"],
                  "points": {f"{arm}/{a}/{n}": point_seed(cfg["seed"], arm, a, n)
                             for arm, a, n in _points(cfg)}},
        "stages": {s: {str(Path(f).relative_to(out)): _sha(Path(f)) for f in fs}
                   for s, fs in stage_files.items()},
        "plots": {str(f.relative_to(out)): _sha(f) for f in files},
    }
    files.append(_write(out / "manifest.json", json.dumps(manifest, indent=1, sort_keys=True)))
    return files


def _discover(cfg, out: Path) -> dict:
    """Stage outputs found on disk, for a report run on its own."""
    pick = lambda pats: sorted(f for pat in pats for f in out.glob(pat))
    return {"build": pick(["device.json", "patch.json", "noise.json", "circuits/noDD_*.txt"]),
            "dd": pick(["dd/*.json", "circuits/DD_*.txt"]),
            "sample": pick(["shots/*.bin"]),
            "decode": pick(["series.csv"]),
            "analyze": pick(["ef_*.csv", "analyze.json"]),
            "fit": pick(["fits.csv"])}


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except Exception as exc:
        raise StageError(f"stage {name} failed: {type(exc).__name__}: {exc}") from exc


def run(cfg: dict, out=None, no_dd: bool = False) -> Path:
    """Full pipeline into a deterministic artifact directory."""
    out = Path(out or cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    done = {}
    done["build"] = _stage("build", stage_build, cfg, out)
    done["dd"] = _stage("dd", stage_dd, cfg, out, no_dd)
    for name, fn in (("sample", stage_sample), ("decode", stage_decode),
                     ("analyze", stage_analyze), ("fit", stage_fit)):
        done[name] = _stage(name, fn, cfg, out)
    _stage("report", stage_report, cfg, out, done)
    return out


def analyze_external(csv_path, out) -> Path:
    """EF and fit reports from an externally supplied series CSV."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        entries = read_series(csv_path)
    except (OSError, KeyError, ValueError) as exc:
        raise StageError(f"cannot read series {csv_path}: {exc}") from exc
    if not entries:
        raise StageError(f"series file {csv_path} has no rows")
    analyze_entries(entries, out)
    fit_entries(entries, out / "fits.csv")
    return out


def sweep(cfg: dict, out) -> Path:
    """1-cycle infidelity of two codes over the chi grid; reports crossings."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    g = _device(cfg)
    base = _base_model(cfg, g)
    if cfg["noise"]["source"] != "median":
        base = median_model(base, g.qubits, g.edges)
    patches = {f"({dx},{dz})": carve_patch(g, dx, dz) for dx, dz in cfg["sweep_patches"]}
    res = chi_sweep(patches, base, cfg["chi_grid"], cfg["shots"], cfg["seed"])
    labels = list(patches)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["chi"] + labels)
        for k, chi in enumerate(res.chis):
            w.writerow([repr(chi)] + [repr(res.infidelity[lab][k]) for lab in labels])
    report = {"crossings": res.crossings, "small": labels[0], "large": labels[1],
              "below_threshold_at": [c for c, a, b in zip(res.chis, *(res.infidelity[l] for l in labels))
                                     if b < a]}
    _write(out / "sweep.json", json.dumps(report, indent=1))
    _write(out / "sweep.svg", line_plot({l: (res.chis, res.infidelity[l]) for l in labels},
                                        "1-cycle infidelity", "chi", "1 - F_e(1)"))
    return out


# -- argument parsing ---------------------------------------------------------

def _parser():
    ap = argparse.ArgumentParser(prog="hexqec", description="Heavy-hex surface-code memory pipeline")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="cmd", required=True)
    for name in ("layout", "build", "dd", "sample", "decode", "analyze", "fit", "report", "run", "sweep"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--chi", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--shots", type=int)
        sp.add_argument("--no-dd", action="store_true", help="run the DD arm without pulses")
    sp = sub.add_parser("analyze-external")
    sp.add_argument("csv", help="series CSV (N,alpha,p,shots,sigma,dd_arm,patch)")
    sp.add_argument("--out", default="external")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.cmd == "analyze-external":
            out = analyze_external(args.csv, args.out)
            print(f"wrote {out}")
            return 0
        cfg = load_config(args.config, chi=args.chi, seed=args.seed, shots=args.shots)
        if args.out:
            cfg["out"] = args.out
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        if args.cmd == "run":
            run(cfg, out, args.no_dd)
        elif args.cmd == "sweep":
            sweep(cfg, out)
            print(json.loads((out / "sweep.json").read_text()))
        elif args.cmd == "dd":
            _stage("dd", stage_dd, cfg, out, args.no_dd)
        else:
            fn = {"layout": stage_layout, "build": stage_build, "sample": stage_sample,
                  "decode": stage_decode, "analyze": stage_analyze, "fit": stage_fit,
                  "report": stage_report}[args.cmd]
            _stage(args.cmd, fn, cfg, out)
        print(f"{args.cmd}: wrote {out}")
        return 0
    except (ConfigError, StageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    warnings.simplefilter("default")
    sys.exit(main())
