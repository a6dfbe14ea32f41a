"""Command-line front end.

Subcommands:
  synth   write a synthetic dataset with exactly known spectrum
  run     decompose a dataset and write the mode table and result files
  loo     run leave-one-out robustness and clustering on top of run
  rom     build reduced-order models and their error curves
  slice   export amplitude/phase (and ellipse) slices of selected modes

Settings come from a flat key=value config file plus a few overriding
flags.  All outputs are deterministic: rerunning a command with the same
config and seed rewrites byte-identical files.  Exit codes: 0 success,
2 configuration error, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fileio
from .dmd import DmdOptions, exact_dmd, split_snapshots
from .errors import ConfigError, DataFormatError, NumericalError
from .grids import SnapshotMatrix, SurfaceSlice, VerticalSection, extract_slice
from .modes import format_mode_table, polar_mode, tidal_ellipse, write_mode_table
from .oracle import generate, tidal_spec
from .ranking import (build_mode_table, cluster_eigenvalues, kde_grid,
                      KdeDensity, leave_one_out, rms_contribution,
                      robustness_scores)
from .rom import RomSelection, build_rom, error_curve, select_modes

_ROM_FIELDS = ("indices", "rms_min", "rms_max", "robustness_min",
               "robustness_max", "persistent_only")


@dataclass
class RunConfig:
    """Flat configuration shared by every subcommand."""

    input: str = ""
    out: str = "out"
    seed: int = 0
    rank: int | None = None
    tlsq: bool = True
    tlsq_rank: int | None = None
    normalize: bool = True
    mean_removal: bool = False
    bfit: str = "multi:10"
    svd_mode: str = "high_accuracy"
    loo_trials: int = 30
    h_robust: float = 2e-3
    h_cluster: float = 2.5e-2
    cluster_level: float = 0.1
    persistence_t: float | None = None
    persistence_factor: float = 0.1
    synth_preset: str = "tidal"
    synth_d: int = 500
    synth_n: int = 144
    synth_dt: float = 1.0
    synth_noise: float = 0.0
    synth_profile: str = "orthogonalized"
    slice_kind: str = "surface"
    slice_channel: str = ""
    slice_k: int = 0
    slice_path: str = ""
    slice_modes: str = "1"
    roms: dict = field(default_factory=dict)


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("on", "true", "yes", "1"):
        return True
    if low in ("off", "false", "no", "0"):
        return False
    raise ConfigError(f"expected on/off, got {s!r}")


def _parse_opt_int(s: str):
    return None if s.strip() == "" else int(s)


def _parse_opt_float(s: str):
    return None if s.strip() == "" else float(s)


_PARSERS = {
    "input": str, "out": str, "seed": int,
    "rank": _parse_opt_int, "tlsq": _parse_bool, "tlsq_rank": _parse_opt_int,
    "normalize": _parse_bool, "mean_removal": _parse_bool,
    "bfit": str, "svd_mode": str,
    "loo_trials": int, "h_robust": float, "h_cluster": float,
    "cluster_level": float,
    "persistence_t": _parse_opt_float, "persistence_factor": float,
    "synth_preset": str, "synth_d": int, "synth_n": int, "synth_dt": float,
    "synth_noise": float, "synth_profile": str,
    "slice_kind": str, "slice_channel": str, "slice_k": int,
    "slice_path": str, "slice_modes": str,
}


def load_config(path: str | Path) -> RunConfig:
    """Parse a flat key=value config file; unknown keys are errors."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cfg = RunConfig()
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith("rom."):
            parts = key.split(".")
            if len(parts) != 3 or parts[2] not in _ROM_FIELDS:
                raise ConfigError(f"{path}:{lineno}: bad ROM key {key!r}")
            _, name, fld = parts
            cfg.roms.setdefault(name, {})[fld] = value
            continue
        if key not in _PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            setattr(cfg, key, _PARSERS[key](value))
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return cfg


def _config_echo(cfg: RunConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        if f.name == "roms":
            continue
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {'' if v is None else v}")
    for name in sorted(cfg.roms):
        for fld in _ROM_FIELDS:
            if fld in cfg.roms[name]:
                lines.append(f"rom.{name}.{fld} = {cfg.roms[name][fld]}")
    return "\n".join(sorted(lines)) + "\n"


def _rom_selection(name: str, fields: dict, n_total: int) -> RomSelection:
    kw = {}
    try:
        if "indices" in fields:
            txt = fields["indices"].strip()
            if txt.lower() == "all":
                kw["indices"] = tuple(range(1, n_total + 1))
            else:
                kw["indices"] = tuple(int(t) for t in txt.split(",") if t.strip())
        for fld in ("rms_min", "rms_max", "robustness_min", "robustness_max"):
            if fld in fields:
                kw[fld] = float(fields[fld])
        if "persistent_only" in fields:
            kw["persistent_only"] = _parse_bool(fields["persistent_only"])
    except ValueError as exc:
        raise ConfigError(f"rom.{name}: {exc}") from exc
    return RomSelection(**kw)


class _OutputDir:
    """Collects written files so the manifest can list them."""

    def __init__(self, out: str, command: str):
        self.dir = Path(out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.dir / name

    def write_text(self, name: str, text: str) -> None:
        self.path(name).write_text(text)

    def write_json(self, name: str, payload: dict) -> None:
        self.write_text(name, json.dumps(payload, sort_keys=True, indent=1) + "\n")

    def finish(self, cfg: RunConfig) -> None:
        self.write_text("config_echo.cfg", _config_echo(cfg))
        manifest = {
            "schema": "koopmode.manifest.v1",
            "command": self.command,
            "files": sorted(self.files),
        }
        (self.dir / "manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=1) + "\n"
        )


def _complex_pairs(arr: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(arr, dtype=complex)]


def _write_csv_rows(path: Path, header: tuple[str, ...], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _resolve_options(cfg: RunConfig, snap: SnapshotMatrix) -> DmdOptions:
    """Turn config values into decomposition options, filling the rank
    default min(numerical rank of the first pair matrix, N - 4)."""
    rank = cfg.rank
    if rank is None:
        x1, _ = split_snapshots(snap)
        rank = int(min(np.linalg.matrix_rank(x1), max(snap.n - 4, 1)))
        rank = max(rank, 1)
    try:
        return DmdOptions(
            r=rank,
            use_tlsq=cfg.tlsq,
            tlsq_rank=cfg.tlsq_rank,
            normalize_columns=cfg.normalize,
            remove_mean=cfg.mean_removal,
            b_fit=cfg.bfit,
            svd_mode=cfg.svd_mode,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _load_input(cfg: RunConfig) -> SnapshotMatrix:
    if not cfg.input:
        raise ConfigError("no input dataset configured (key: input)")
    try:
        return fileio.ingest(cfg.input)
    except ValueError as exc:
        raise DataFormatError(str(exc)) from exc


def _window(cfg: RunConfig, snap: SnapshotMatrix) -> float:
    return cfg.persistence_t if cfg.persistence_t is not None else (snap.n - 1) * snap.dt


def _write_result_files(out: _OutputDir, result) -> None:
    fileio.write_mode_matrix(out.path("modes.dmdm"), result.modes, result.dt, result.t0)
    payload = {
        "schema": "koopmode.result.v1",
        "r": result.r,
        "dt": result.dt,
        "t0": result.t0,
        "options": result.options.to_json_dict(),
        "eigenvalues": _complex_pairs(result.mu),
        "gamma": _complex_pairs(result.gamma),
        "b": _complex_pairs(result.b),
        "residuals": [float(x) for x in result.residuals],
        "singular_values": [float(x) for x in result.singular_values],
        "modes_file": "modes.dmdm",
    }
    out.write_json("result.json", payload)
    _write_csv_rows(
        out.path("singular_values.csv"), ("k", "sigma"),
        ((str(k + 1), fileio.format_float(s))
         for k, s in enumerate(result.singular_values)),
    )


def _table_csv(out: _OutputDir, infos) -> None:
    write_mode_table(infos, out.path("modes_table.csv"))


def cmd_synth(cfg: RunConfig) -> int:
    if cfg.synth_preset != "tidal":
        raise ConfigError(f"unknown synth preset {cfg.synth_preset!r}")
    try:
        spec = tidal_spec(d=cfg.synth_d, n=cfg.synth_n, dt=cfg.synth_dt,
                          noise_sigma=cfg.synth_noise, seed=cfg.seed,
                          profile=cfg.synth_profile)
        snap, truth = generate(spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _OutputDir(cfg.out, "synth")
    fileio.write_snapshots(out.path("oracle.dmds"), snap)
    out.files.append("oracle.dmds.grid.json")
    fileio.write_mode_matrix(out.path("ground_truth_modes.dmdm"), truth.modes, spec.dt)
    out.write_json("ground_truth.json", {
        "schema": "koopmode.ground_truth.v1",
        "dt": spec.dt,
        "eigenvalues": _complex_pairs(truth.mu),
        "gamma": _complex_pairs(truth.gamma),
        "b": _complex_pairs(truth.b),
        "profile": cfg.synth_profile,
        "modes_file": "ground_truth_modes.dmdm",
    })
    out.finish(cfg)
    print(f"synth: wrote {snap.d}x{snap.n} dataset, {truth.mu.size} true modes "
          f"to {out.dir}")
    for g, b in zip(truth.gamma, truth.b):
        if g.imag < 0:
            continue
        p = math.inf if g.imag == 0 else 2 * math.pi / abs(g.imag)
        pt = "" if math.isinf(p) else f"{p:.2f}"
        print(f"  gamma={g.real:+.4f}{g.imag:+.4f}i  period={pt:>6}  |b|={abs(b):.2f}")
    return 0


def cmd_run(cfg: RunConfig) -> int:
    snap = _load_input(cfg)
    opts = _resolve_options(cfg, snap)
    result = exact_dmd(snap, opts)
    infos = build_mode_table(result, _window(cfg, snap), layout=snap.layout)
    out = _OutputDir(cfg.out, "run")
    _write_result_files(out, result)
    _table_csv(out, infos)
    out.finish(cfg)
    print(f"run: r={result.r} modes from {snap.d}x{snap.n} snapshots -> {out.dir}")
    print(format_mode_table(infos, max_rows=20), end="")
    return 0


def _loo_pipeline(cfg: RunConfig, snap: SnapshotMatrix, opts: DmdOptions):
    loo = leave_one_out(snap, opts, trials=cfg.loo_trials, seed=cfg.seed)
    scores = robustness_scores(loo.base.mu, loo, h=cfg.h_robust)
    t_window = _window(cfg, snap)
    rms = np.array([
        rms_contribution(complex(loo.base.b[k]), complex(loo.base.gamma[k]), t_window)
        for k in range(loo.base.r)
    ])
    clusters = cluster_eigenvalues(loo.base.mu, loo.pooled(), h=cfg.h_cluster,
                                   level_fraction=cfg.cluster_level, weights=rms)
    return loo, scores, clusters


def cmd_loo(cfg: RunConfig) -> int:
    snap = _load_input(cfg)
    opts = _resolve_options(cfg, snap)
    loo, scores, clusters = _loo_pipeline(cfg, snap, opts)
    infos = build_mode_table(loo.base, _window(cfg, snap), layout=snap.layout,
                             robustness=scores, clusters=clusters)
    out = _OutputDir(cfg.out, "loo")
    _write_result_files(out, loo.base)
    _table_csv(out, infos)
    _write_csv_rows(
        out.path("pooled_eigenvalues.csv"),
        ("trial", "omitted_column", "re", "im"),
        ((str(t), str(trial.omitted_column),
          fileio.format_float(z.real), fileio.format_float(z.imag))
         for t, trial in enumerate(loo.trials) for z in trial.mu),
    )
    pooled = loo.pooled()
    density = KdeDensity(points=pooled, weights=np.ones(pooled.size),
                         bandwidth=cfg.h_cluster)
    re_axis, im_axis, values = kde_grid(density, extra_points=loo.base.mu)
    _write_csv_rows(
        out.path("kde_grid.csv"), ("re", "im", "density"),
        ((fileio.format_float(re_axis[i]), fileio.format_float(im_axis[j]),
          fileio.format_float(values[i, j]))
         for i in range(re_axis.size) for j in range(im_axis.size)),
    )
    out.finish(cfg)
    n_clustered = sum(1 for c in clusters if c is not None)
    print(f"loo: {len(loo.trials)} trials, {pooled.size} pooled eigenvalues, "
          f"{n_clustered}/{loo.base.r} modes in clusters -> {out.dir}")
    print(format_mode_table(infos, max_rows=20), end="")
    return 0


def cmd_rom(cfg: RunConfig) -> int:
    if not cfg.roms:
        raise ConfigError("no ROM selections configured (keys: rom.<name>.<field>)")
    snap = _load_input(cfg)
    opts = _resolve_options(cfg, snap)
    needs_loo = any(
        "robustness_min" in f or "robustness_max" in f for f in cfg.roms.values()
    )
    t_window = _window(cfg, snap)
    if needs_loo:
        loo, scores, clusters = _loo_pipeline(cfg, snap, opts)
        result = loo.base
        infos = build_mode_table(result, t_window, layout=snap.layout,
                                 robustness=scores, clusters=clusters)
    else:
        result = exact_dmd(snap, opts)
        infos = build_mode_table(result, t_window, layout=snap.layout)
    x1, _ = split_snapshots(snap)
    data_rank = int(np.linalg.matrix_rank(x1))
    out = _OutputDir(cfg.out, "rom")
    summary = {}
    for name in sorted(cfg.roms):
        sel_fields = dict(cfg.roms[name])
        if "persistent_only" in sel_fields:
            sel = _rom_selection(name, sel_fields, result.r)
            sel = dataclasses.replace(sel, persistence_t=t_window,
                                      persistence_factor=cfg.persistence_factor)
        else:
            sel = _rom_selection(name, sel_fields, result.r)
        try:
            indices = select_modes(infos, sel)
            model = build_rom(result, indices)
            curve = error_curve(snap, model)
        except ValueError as exc:
            raise ConfigError(f"rom.{name}: {exc}") from exc
        _write_csv_rows(
            out.path(f"rom_{name}_errors.csv"),
            ("n", "t_hours", "rom_norm", "rel_error"),
            ((str(int(n)), fileio.format_float(t),
              fileio.format_float(rn), fileio.format_float(re))
             for n, t, rn, re in zip(curve.steps, curve.times_hours,
                                     curve.rom_norm, curve.rel_error)),
        )
        summary[name] = {
            "indices": list(model.indices),
            "n_modes": model.n_modes,
            "pct_of_rank": 100.0 * model.n_modes / data_rank,
            "max_rel_error": float(curve.rel_error.max()),
        }
        print(f"rom {name}: {model.n_modes} modes "
              f"({summary[name]['pct_of_rank']:.2f}% of rank {data_rank}), "
              f"max rel error {curve.rel_error.max():.3e}")
    out.write_json("rom_summary.json", {
        "schema": "koopmode.rom_summary.v1",
        "data_rank": data_rank,
        "roms": summary,
    })
    out.finish(cfg)
    return 0


def _slice_value(x: float) -> str:
    return "" if math.isnan(x) else fileio.format_float(x)


def cmd_slice(cfg: RunConfig) -> int:
    snap = _load_input(cfg)
    opts = _resolve_options(cfg, snap)
    result = exact_dmd(snap, opts)
    layout = snap.layout
    channel = cfg.slice_channel or layout.channels[0].name
    names = {c.name for c in layout.channels}
    if channel not in names:
        raise ConfigError(f"layout has no channel named {channel!r}; "
                          f"available: {', '.join(sorted(names))}")
    try:
        modes_idx = [int(t) for t in cfg.slice_modes.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad slice_modes: {exc}") from exc
    if not modes_idx:
        raise ConfigError("slice_modes selects no modes")
    for m in modes_idx:
        if not 1 <= m <= result.r:
            raise ConfigError(f"slice mode index {m} outside 1..{result.r}")
    if cfg.slice_kind == "surface":
        spec = SurfaceSlice(channel=channel, k=cfg.slice_k)
    elif cfg.slice_kind == "section":
        try:
            verts = tuple(
                tuple(int(c) for c in vert.split(","))
                for vert in cfg.slice_path.split(";") if vert.strip()
            )
        except ValueError as exc:
            raise ConfigError(f"bad slice_path: {exc}") from exc
        if not verts or any(len(v) != 2 for v in verts):
            raise ConfigError("slice_path must be j0,i0;j1,i1;...")
        spec = VerticalSection(channel=channel, path=verts)
    else:
        raise ConfigError(f"unknown slice_kind {cfg.slice_kind!r}")
    out = _OutputDir(cfg.out, "slice")
    for m in modes_idx:
        vec = result.modes[:, m - 1] * result.b[m - 1]
        try:
            sl = extract_slice(vec, layout, spec)
        except (IndexError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        amp = np.abs(sl.values)
        amp[np.isnan(sl.values.real)] = np.nan
        phase = np.angle(sl.values)
        phase[np.isnan(sl.values.real)] = np.nan
        for tag, grid in (("amplitude", amp), ("phase", phase)):
            _write_csv_rows(
                out.path(f"slice_mode{m}_{tag}.csv"), ("row", "col", "value"),
                ((str(i), str(j), _slice_value(grid[i, j]))
                 for i in range(grid.shape[0]) for j in range(grid.shape[1])),
            )
        is_pair = abs(result.mu[m - 1].imag) > 1e-9
        if (cfg.slice_kind == "surface" and is_pair
                and {"ux", "uy"} <= names):
            w_ux = layout.channels[layout.channel_index("ux")].weight
            w_uy = layout.channels[layout.channel_index("uy")].weight
            gu = layout.grid_from_stacked(vec, "ux")[cfg.slice_k] * (2.0 / w_ux)
            gv = layout.grid_from_stacked(vec, "uy")[cfg.slice_k] * (2.0 / w_uy)
            rows = []
            for j in range(layout.ny):
                for i in range(layout.nx):
                    u, v = gu[j, i], gv[j, i]
                    if np.isnan(u.real) or np.isnan(v.real):
                        rows.append((str(j), str(i), "", "", "", ""))
                        continue
                    ell = tidal_ellipse(u, v)
                    rows.append((
                        str(j), str(i),
                        fileio.format_float(ell.semi_major),
                        fileio.format_float(ell.semi_minor),
                        fileio.format_float(ell.orientation_rad),
                        ell.rotation_sense,
                    ))
            _write_csv_rows(
                out.path(f"slice_mode{m}_ellipse.csv"),
                ("row", "col", "semi_major", "semi_minor", "orientation_rad",
                 "rotation_sense"),
                rows,
            )
    out.finish(cfg)
    print(f"slice: wrote {cfg.slice_kind} slices of modes {modes_idx} -> {out.dir}")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "run": cmd_run,
    "loo": cmd_loo,
    "rom": cmd_rom,
    "slice": cmd_slice,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="koopmode",
        description="Koopman-mode decomposition toolkit for gridded snapshot data",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="random seed (overrides config)")
        p.add_argument("--rank", type=int, help="truncation rank (overrides config)")
        p.add_argument("--tlsq", choices=("on", "off"),
                       help="total-least-squares projection (overrides config)")
        p.add_argument("--mean-removal", choices=("on", "off"), dest="mean_removal",
                       help="temporal mean removal (overrides config)")
        p.add_argument("--bfit", help="amplitude fit: first or multi:<count>")
    return parser


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    if args.out is not None:
        cfg.out = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if args.rank is not None:
        cfg.rank = args.rank
    if args.tlsq is not None:
        cfg.tlsq = args.tlsq == "on"
    if args.mean_removal is not None:
        cfg.mean_removal = args.mean_removal == "on"
    if args.bfit is not None:
        cfg.bfit = args.bfit
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = _apply_overrides(cfg, args)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (DataFormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
