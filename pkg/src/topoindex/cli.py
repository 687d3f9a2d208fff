"""Command-line entry point: ``topoindex run`` and ``topoindex reproduce``.

Settings are resolved in increasing precedence: built-in defaults, the
``--config`` JSON file, ``--set key=value`` overrides (dotted paths), and
finally the dedicated ``--seed``, ``--threads`` and ``--out`` flags.  The
set of keys is closed; an unknown key is a configuration error.
"""

from __future__ import annotations

import argparse
import copy
import dataclasses
import hashlib
import json
import logging
import os
import platform
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import scipy

from . import __version__
from . import io
from .errors import (ConfigError, DomainError, NumericalError, ResourceError, SymmetryError,
                     TopoIndexError)
from .models import (InteractionTerm, ModelSpec, build_atomic, build_extended_hubbard, build_hubbard_ssh,
                     build_rice_mele, build_ssh, restrict_half_chain)
from .quadratic import zak_phase
from .scan import (PathSpec, default_convention, disorder_ensemble, edge_gap_scaling, sweep,
                   winding_number, ENSEMBLE_HEADER, SWEEP_HEADER)
from .solver import solve
from .twist import (INDEX_CSV_HEADER, decoupled_index, default_profile, duality_check,
                    edge_excitation_search, lsm_bound, make_profile, twist_for, z2_index)

log = logging.getLogger("topoindex")

COMMANDS = ("index", "duality", "sweep", "ensemble", "edge", "zak", "winding", "bound", "decoupled")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_UNDEFINED = 0, 1, 2, 3, 4

DEFAULTS: Dict[str, Any] = {
    "command": "index",
    "seed": 1,
    "threads": None,
    "model": {
        "builder": "ssh",
        "L": 12,
        "s": 0.2,
        "U": 0.0,
        "J": 0.0,
        "potential": -1.0,
        "hop": None,
        "phase": 0.0,
        "dimerization": 0.5,
        "stagger": 1.0,
        "boundary": "ring",
        "cut": None,
        "cross_coupling": 0.0,
        "spec": None,
    },
    "twist": {"convention": None, "x0": None, "ell": None, "shape": "linear"},
    "solver": {
        "max_dim": 2_000_000,
        "dense_threshold": 2000,
        "degeneracy_tol": 1e-8,
        "residual_tol": 1e-8,
        "reality_tol": 1e-9,
        "magnitude_tol": 1e-6,
    },
    "output": {"dir": "out", "plot": True},
    "sweep": {"param": "s", "start": 0.0, "stop": 1.0, "num": 21, "resolution": None},
    "ensemble": {"seeds": None, "num_seeds": 20, "hop_amplitude": 0.2, "int_amplitude": 0.0,
                 "tag": "phg", "gap_threshold": 0.0},
    "edge": {"eps": 1.0, "width": None, "sizes": None},
    "zak": {"s": [0.1, 0.3, 0.7, 0.9], "Nk": 64},
    "winding": {"param": "phase", "start": 0.0, "stop": 2 * np.pi, "num": 33, "method": "ed",
                "convention": "site_centered"},
}


# -- configuration --------------------------------------------------------

def _merge(base: dict, update: dict, prefix: str = "") -> dict:
    for key, value in update.items():
        path = prefix + key
        if key not in base:
            raise ConfigError(f"unknown config key {path!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {path!r} must be an object")
            _merge(base[key], value, path + ".")
        else:
            base[key] = value
    return base


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, value = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            raise ConfigError(f"unknown config key {key!r}")
        node = node[p]
    if parts[-1] not in node or isinstance(node[parts[-1]], dict):
        raise ConfigError(f"unknown config key {key!r}")
    node[parts[-1]] = _parse_value(value)


def load_config(path: Optional[str] = None, overrides: Sequence[str] = (), **flags) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        _merge(cfg, data)
    for item in overrides:
        apply_override(cfg, item)
    for key, value in flags.items():
        if value is None:
            continue
        if key == "out":
            cfg["output"]["dir"] = value
        elif key == "command":
            cfg["command"] = value
        else:
            cfg[key] = value
    if cfg["command"] not in COMMANDS:
        raise ConfigError(f"unknown command {cfg['command']!r}; choose from {', '.join(COMMANDS)}")
    return cfg


def config_sha256(cfg: dict) -> str:
    return hashlib.sha256(io.dumps(_payload_config(cfg)).encode()).hexdigest()


def _payload_config(cfg: dict) -> dict:
    """Config without settings that cannot change numerical output."""
    c = copy.deepcopy(cfg)
    c.pop("threads", None)
    c["output"] = {k: v for k, v in c["output"].items() if k != "dir"}
    return c


# -- model and twist from config -------------------------------------------

def build_model(m: dict) -> ModelSpec:
    b = m["builder"]
    L, bnd = int(m["L"]), m["boundary"]
    if b == "spec":
        if not isinstance(m["spec"], dict):
            raise ConfigError("builder 'spec' needs model.spec")
        spec = ModelSpec.from_dict(m["spec"])
    elif b == "ssh":
        spec = build_ssh(L, float(m["s"]), bnd, m["cut"])
    elif b == "hubbard_ssh":
        spec = build_hubbard_ssh(L, float(m["s"]), float(m["U"]), bnd, m["cut"])
    elif b == "extended_hubbard":
        spec = build_extended_hubbard(L, float(m["U"]), float(m["J"]), bnd)
    elif b == "atomic":
        spec = build_atomic(L, float(m["potential"]), 0.0 if m["hop"] is None else float(m["hop"]), bnd)
    elif b == "rice_mele":
        spec = build_rice_mele(L, float(m["phase"]), 1.0 if m["hop"] is None else float(m["hop"]),
                               float(m["dimerization"]), float(m["stagger"]), bnd)
    else:
        raise ConfigError(f"unknown model builder {b!r}")
    V = float(m["cross_coupling"] or 0.0)
    if V:
        if spec.cut is None or spec.spinful:
            raise ConfigError("cross_coupling needs a spinless spec with a cut")
        c = spec.cut
        term = InteractionTerm(V, ((c - 1, None), (c, None)))
        spec = dataclasses.replace(spec, int_terms=spec.int_terms + (term,))
    return spec


def build_profile(spec: ModelSpec, tw: dict, convention: str):
    if tw["x0"] is None and tw["ell"] is None:
        return default_profile(spec, convention, tw["shape"])
    if tw["x0"] is None or tw["ell"] is None:
        base = default_profile(spec, convention, tw["shape"], tw["ell"])
        x0 = base.x0 if tw["x0"] is None else tw["x0"]
        ell = base.ell if tw["ell"] is None else tw["ell"]
    else:
        x0, ell = tw["x0"], tw["ell"]
    return make_profile(float(x0), float(ell), tw["shape"], spec.r0, spec.L,
                        "ring" if spec.is_ring else "open")


def _solver_kw(cfg: dict) -> dict:
    s = cfg["solver"]
    return {"max_dim": int(s["max_dim"]), "dense_threshold": int(s["dense_threshold"]),
            "degeneracy_tol": float(s["degeneracy_tol"]), "residual_tol": float(s["residual_tol"])}


def _index_kw(cfg: dict) -> dict:
    s = cfg["solver"]
    return {"reality_tol": float(s["reality_tol"]), "magnitude_tol": float(s["magnitude_tol"])}


def _grid(block: dict) -> np.ndarray:
    num = int(block["num"])
    if num < 2:
        raise ConfigError("a grid needs at least two points")
    return np.linspace(float(block["start"]), float(block["stop"]), num)


def _family(cfg: dict, param: str):
    if param not in DEFAULTS["model"] or param in ("builder", "spec", "boundary"):
        raise ConfigError(f"cannot sweep model key {param!r}")
    model = cfg["model"]

    def fam(v: float) -> ModelSpec:
        m = dict(model)
        m[param] = float(v)
        return build_model(m)
    return fam


# -- commands ----------------------------------------------------------------

class Outcome:
    def __init__(self, out: Path, plot: bool):
        self.out = out
        self.plot = plot
        self.files: List[str] = []
        self.status = EXIT_OK
        self.summary: Dict[str, Any] = {}

    def json(self, name: str, obj) -> None:
        io.write_json(self.out / name, obj)
        self.files.append(name)

    def csv(self, name: str, header, rows) -> None:
        io.write_csv(self.out / name, header, rows)
        self.files.append(name)

    def columns(self, name: str, x, y, header: str) -> None:
        io.write_columns(self.out / name, x, y, header)
        self.files.append(name)

    def figure(self, fn, name: str, *args, **kw) -> None:
        if self.plot:
            fn(*args, self.out / name, **kw)
            self.files.append(name)


def cmd_index(cfg, spec, oc: Outcome) -> None:
    conv = cfg["twist"]["convention"] or default_convention(spec)
    gs = solve(spec, **_solver_kw(cfg))
    rep = z2_index(gs, spec, build_profile(spec, cfg["twist"], conv), conv, **_index_kw(cfg))
    oc.json("index.json", rep)
    oc.csv("index.csv", INDEX_CSV_HEADER, [rep.csv_row()])
    oc.summary = {"index": rep.index}
    if rep.index is None:
        oc.status = EXIT_UNDEFINED


def cmd_duality(cfg, spec, oc: Outcome) -> None:
    gs = solve(spec, **_solver_kw(cfg))
    conv = default_convention(spec)
    res = duality_check(gs, spec, build_profile(spec, cfg["twist"], conv))
    oc.json("duality.json", {"index": res.index, "dual_index": res.dual_index, "sum": res.total,
                             "primary": res.primary, "dual": res.dual})
    oc.csv("duality.csv", INDEX_CSV_HEADER, [res.primary.csv_row(), res.dual.csv_row()])
    oc.summary = {"index": res.index, "dual_index": res.dual_index, "sum": res.total}
    if res.total is None:
        oc.status = EXIT_UNDEFINED


def cmd_bound(cfg, spec, oc: Outcome) -> None:
    conv = cfg["twist"]["convention"] or default_convention(spec)
    gs = solve(spec, **_solver_kw(cfg))
    prof = build_profile(spec, cfg["twist"], conv)
    lhs, rhs = lsm_bound(gs, spec, twist_for(gs, prof, conv))
    oc.json("bound.json", {"spec_hash": spec.spec_hash(), "convention": conv, "profile": prof.summary(),
                           "lhs": lhs, "rhs": rhs, "holds": bool(lhs <= rhs + 1e-9), "gap": gs.gap})
    oc.summary = {"lhs": lhs, "rhs": rhs}


def cmd_sweep(cfg, spec, oc: Outcome) -> None:
    sw = cfg["sweep"]
    fam = _family(cfg, sw["param"])
    path = PathSpec(fam, _grid(sw), False, None, cfg["model"]["builder"], {"param": sw["param"]})
    conv = cfg["twist"]["convention"] or default_convention(spec)
    prof = build_profile(fam(path.grid[0]), cfg["twist"], conv)
    res = sweep(path, prof, conv, sw["resolution"], cfg["threads"], **_solver_kw(cfg))
    oc.csv("sweep.csv", SWEEP_HEADER, res.rows())
    oc.json("sweep.json", res)
    ok = [p for p in res.points if p.re is not None]
    oc.columns("sweep_re.dat", [p.s for p in ok], [p.re for p in ok], f"{sw['param']} Re<U>")
    ok = [p for p in res.points if p.gap is not None]
    oc.columns("sweep_gap.dat", [p.s for p in ok], [p.gap for p in ok], f"{sw['param']} gap")
    from . import plotting
    oc.figure(plotting.plot_sweep, "sweep.png", res)
    oc.summary = {"transitions": res.transitions, "refined": res.refined}


def cmd_ensemble(cfg, spec, oc: Outcome) -> None:
    en = cfg["ensemble"]
    seeds = en["seeds"] if en["seeds"] is not None else list(range(int(cfg["seed"]),
                                                                    int(cfg["seed"]) + int(en["num_seeds"])))
    conv = cfg["twist"]["convention"] or default_convention(spec)
    res = disorder_ensemble(spec, float(en["hop_amplitude"]), float(en["int_amplitude"]), seeds,
                            build_profile(spec, cfg["twist"], conv), conv, en["tag"],
                            float(en["gap_threshold"]), cfg["threads"], **_solver_kw(cfg))
    oc.csv("ensemble.csv", ENSEMBLE_HEADER, res.rows())
    oc.json("ensemble.json", res)
    from . import plotting
    oc.figure(plotting.plot_ensemble, "ensemble.png", res)
    oc.summary = {"counts": res.counts, "min_gap": res.min_gap}


def cmd_edge(cfg, spec, oc: Outcome) -> None:
    ed = cfg["edge"]
    half = spec if spec.boundary in ("half_chain", "open") else restrict_half_chain(spec)
    gs = solve(half, **_solver_kw(cfg))
    res = edge_excitation_search(half, float(ed["eps"]), width=ed["width"], gs=gs,
                                 shape=cfg["twist"]["shape"])
    oc.json("edge.json", {"half_gap": gs.gap, "search": res})
    oc.columns("edge_scan.dat", [t[0] for t in res.trace], [t[1] for t in res.trace], "R Re<U>")
    from . import plotting
    oc.figure(plotting.plot_edge, "edge.png", res.trace, R_cross=res.R)
    summary = {"half_gap": gs.gap, "crossing": res.crossing, "energy": res.energy}
    if ed["sizes"]:
        model = cfg["model"]

        def family(L):
            m = dict(model)
            m["L"], m["boundary"] = int(L), "ring"
            return build_model(m)
        rows = edge_gap_scaling(family, [int(L) for L in ed["sizes"]], threads=cfg["threads"],
                                **_solver_kw(cfg))
        oc.csv("edge_gaps.csv", ["L", "bulk_index", "half_gap", "error"],
               [[r["L"], r["bulk_index"], r["half_gap"], r["error"]] for r in rows])
        summary["scaling"] = rows
    oc.summary = summary


def cmd_zak(cfg, spec, oc: Outcome) -> None:
    zk = cfg["zak"]
    rows = [(float(s), zak_phase(float(s), int(zk["Nk"]))) for s in zk["s"]]
    oc.csv("zak.csv", ["s", "nu"], rows)
    oc.json("zak.json", {"Nk": int(zk["Nk"]), "values": [{"s": s, "nu": nu} for s, nu in rows]})
    oc.columns("zak.dat", [r[0] for r in rows], [r[1] for r in rows], "s nu")
    oc.summary = {"nu": [r[1] for r in rows]}


def cmd_winding(cfg, spec, oc: Outcome) -> None:
    wd = cfg["winding"]
    fam = _family(cfg, wd["param"])
    path = PathSpec(fam, _grid(wd), True, None, cfg["model"]["builder"], {"param": wd["param"]})
    conv = wd["convention"]
    prof = build_profile(fam(path.grid[0]), cfg["twist"], conv)
    res = winding_number(path, prof, conv, wd["method"], float(cfg["solver"]["magnitude_tol"]),
                         threads=cfg["threads"], **_solver_kw(cfg))
    oc.json("winding.json", res)
    z = [v for _, v in res.samples]
    oc.columns("winding_path.dat", [v.real for v in z], [v.imag for v in z], "Re<U> Im<U>")
    from . import plotting
    oc.figure(plotting.plot_winding, "winding.png", res)
    oc.summary = {"q": res.q}


def cmd_decoupled(cfg, spec, oc: Outcome) -> None:
    gs = solve(spec, **_solver_kw(cfg))
    prof = None
    if cfg["twist"]["x0"] is not None or cfg["twist"]["ell"] is not None:
        prof = build_profile(spec, cfg["twist"], default_convention(spec))
    rep = decoupled_index(spec, prof, gs=gs)
    oc.json("decoupled.json", rep)
    path = rep.extra["deformation"]
    oc.columns("deformation.dat", [p["R"] for p in path], [p["re"] for p in path], "R Re<U>")
    oc.summary = {"index": rep.index, "path_positive": rep.extra["path_positive"]}
    if rep.index is None:
        oc.status = EXIT_UNDEFINED


HANDLERS = {
    "index": cmd_index, "duality": cmd_duality, "sweep": cmd_sweep, "ensemble": cmd_ensemble,
    "edge": cmd_edge, "zak": cmd_zak, "winding": cmd_winding, "bound": cmd_bound,
    "decoupled": cmd_decoupled,
}


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError, DomainError, SymmetryError)):
        return EXIT_CONFIG
    if isinstance(exc, (NumericalError, ResourceError)):
        return EXIT_NUMERICAL
    return EXIT_FAIL


def _sha_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _payload_files(files: Sequence[str]) -> List[str]:
    return [f for f in files if not f.endswith(".png")]


def run(cfg: dict) -> int:
    """Execute one resolved config; always leaves a manifest or an error record."""
    out = Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    oc = Outcome(out, bool(cfg["output"]["plot"]))
    t0 = time.perf_counter()
    try:
        spec = build_model(cfg["model"])
        HANDLERS[cfg["command"]](cfg, spec, oc)
    except (TopoIndexError, ValueError) as exc:
        code = _exit_code(exc)
        record = {"command": cfg["command"], "error": type(exc).__name__, "message": str(exc),
                  "exit_code": code}
        if isinstance(exc, NumericalError) and exc.residual is not None:
            record["residual"] = exc.residual
        io.write_json(out / "error.json", record)
        log.error("%s: %s", type(exc).__name__, exc)
        return code
    elapsed = time.perf_counter() - t0
    manifest = {
        "artifact_version": __version__,
        "command": cfg["command"],
        "config": cfg,
        "config_sha256": config_sha256(cfg),
        "seed": cfg["seed"],
        "tolerances": dict(cfg["solver"]),
        "spec_hash": spec.spec_hash(),
        "outputs": {f: _sha_file(out / f) for f in _payload_files(oc.files)},
        "figures": [f for f in oc.files if f.endswith(".png")],
        "status": oc.status,
        "summary": oc.summary,
        "environment": {"python": platform.python_version(), "numpy": np.__version__,
                        "scipy": scipy.__version__},
        "timings": {"wall_seconds": elapsed},
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    io.write_json(out / "run.manifest.json", manifest)
    print(f"{cfg['command']}: {json.dumps(oc.summary, default=str)} -> {out}")
    return oc.status


def reproduce(manifest_path: str, out: Optional[str] = None, seed: Optional[int] = None,
              override: bool = False) -> int:
    """Rerun a manifest's config and compare every payload file byte for byte."""
    mpath = Path(manifest_path)
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
        cfg = manifest["config"]
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"cannot read manifest {manifest_path}: {exc}") from exc
    diffs = []
    if manifest.get("artifact_version") != __version__:
        diffs.append(f"artifact_version: manifest {manifest.get('artifact_version')} != installed {__version__}")
    if config_sha256(cfg) != manifest.get("config_sha256"):
        diffs.append("config_sha256 does not match the embedded config")
    if seed is not None and seed != cfg.get("seed"):
        diffs.append(f"seed: manifest {cfg.get('seed')} != requested {seed}")
    if diffs and not override:
        for d in diffs:
            print(f"refusing: {d}", file=sys.stderr)
        return EXIT_CONFIG
    cfg = copy.deepcopy(cfg)
    if seed is not None:
        cfg["seed"] = seed
    cfg["output"]["dir"] = out or str(mpath.parent / "reproduce")
    code = run(cfg)
    new_dir = Path(cfg["output"]["dir"])
    mismatched = []
    for name, digest in manifest.get("outputs", {}).items():
        f = new_dir / name
        if not f.exists() or _sha_file(f) != digest:
            mismatched.append(name)
    for name in mismatched:
        print(f"mismatch: {name}", file=sys.stderr)
    if mismatched:
        return EXIT_FAIL
    print(f"reproduced {len(manifest.get('outputs', {}))} payload files identically")
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="topoindex", description="Z2 twist indices of 1D lattice fermions.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="action", required=True)
    r = sub.add_parser("run", help="run one command from a config")
    r.add_argument("command", nargs="?", choices=COMMANDS, help="overrides the config's command")
    r.add_argument("--config", help="JSON run configuration")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted-path override, e.g. model.s=0.8 (repeatable)")
    r.add_argument("--out", help="output directory")
    r.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $TOPOINDEX_THREADS or 1)")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    rp = sub.add_parser("reproduce", help="rerun a run.manifest.json and compare outputs")
    rp.add_argument("manifest")
    rp.add_argument("--out", help="output directory (default: <manifest dir>/reproduce)")
    rp.add_argument("--seed", type=int, default=None)
    rp.add_argument("--override", action="store_true", help="rerun despite setting differences")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.action == "reproduce":
            return reproduce(args.manifest, args.out, args.seed, args.override)
        threads = args.threads
        if threads is None and os.environ.get("TOPOINDEX_THREADS"):
            threads = int(os.environ["TOPOINDEX_THREADS"])
        cfg = load_config(args.config, args.set, command=args.command, out=args.out,
                          seed=args.seed, threads=threads)
        if args.no_plot:
            cfg["output"]["plot"] = False
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
