"""Command-line harness: design sheets, BER runs, spectra, sweeps.

Configuration is flat key=value text (one pair per line, '#' comments).
Recognized keys and their defaults (defaults reproduce the reference
shallow-water setup):

  system:      f_c=50e3 bandwidth=5e3 symbol_time=0.1024 prefix_time=0.0256
               a_max=3.43e-3 (or v_max + medium_speed=1500) min_subcarriers=256
               step_eps=1e-3 step_ct0=1e-2 sample_rate=0 (0 means 8*bandwidth)
  experiment:  waveforms=hfmc,ofdm,sc,oddm alphabet=qpsk snr_db=20,25
               trials=200 master_seed=1234 csi_nmse=0 num_tx= workers=1
               oddm_shape= (e.g. 8x8)
  channel:     paths=15 mean_interarrival=1e-3 decay_db=20 guard=25.6e-3
               channel_a_max= (defaults to a_max)
  spectrum:    subcarriers=first,middle,last resolution=5
  sweep:       sweep_values=... sweep_snr= sweep_epsilon=

Presets: --preset desk truncates the design to 64 subcarriers for quick
runs; --preset paper keeps the full design.  File keys override preset
values; command-line flags override both.  Outputs are deterministic CSVs
(identical config + seed gives identical bytes) plus a manifest carrying
timing and diagnostics.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (approx_mse_db, gram_matrix_db, in_band_deviation_db,
                       orthogonality_sweep, out_of_band_fraction, sir_db,
                       spectrum_dft, subcarrier_band, transmit_gram)
from .channel import ChannelStats, draw_realization, realization_to_text
from .design import (InfeasibleDesignError, SystemConfig, ct0_bounds,
                     design_sheet, epsilon_bounds, select_parameters,
                     tradeoff_sweep)
from .modem import (band_occupancy, build_basis, equivalent_channel_analytic,
                    equivalent_channel_numerical)
from .output import config_hash, write_csv, write_manifest
from .sim import WAVEFORMS, ExperimentConfig, run_ber
from .waveform import truncate_transmit

_SYSTEM_KEYS = {
    "f_c", "bandwidth", "symbol_time", "prefix_time", "a_max", "v_max",
    "medium_speed", "min_subcarriers", "step_eps", "step_ct0", "sample_rate",
}
_EXPERIMENT_KEYS = {
    "waveforms", "alphabet", "snr_db", "trials", "master_seed", "csi_nmse",
    "num_tx", "workers", "oddm_shape",
}
_CHANNEL_KEYS = {
    "paths", "mean_interarrival", "decay_db", "guard", "channel_a_max",
}
_OTHER_KEYS = {
    "subcarriers", "resolution", "sweep_values", "sweep_snr", "sweep_epsilon",
}
_ALL_KEYS = _SYSTEM_KEYS | _EXPERIMENT_KEYS | _CHANNEL_KEYS | _OTHER_KEYS

_TABLE_DEFAULTS = dict(f_c=50e3, bandwidth=5e3, symbol_time=0.1024,
                       prefix_time=0.0256, a_max=3.43e-3, min_subcarriers=256)

_PRESETS = {
    "desk": {"num_tx": "64"},
    "paper": {},
}


def parse_config_text(text: str) -> dict:
    """key=value lines into a string dict; '#' starts a comment."""
    out = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {ln}: expected key=value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _ALL_KEYS:
            raise ValueError(f"config line {ln}: unknown key {key!r}")
        out[key] = val
    return out


def _floats(val: str):
    return tuple(float(s) for s in val.split(",") if s.strip())


def build_system(kv: dict) -> SystemConfig:
    base = dict(_TABLE_DEFAULTS)
    if "v_max" in kv and "a_max" not in kv:
        speed = float(kv.get("medium_speed", 1500.0))
        base["a_max"] = float(kv["v_max"]) / speed
    for key in ("f_c", "bandwidth", "symbol_time", "prefix_time", "a_max",
                "step_eps", "step_ct0", "sample_rate"):
        if key in kv:
            base[key] = float(kv[key])
    if "min_subcarriers" in kv:
        base["min_subcarriers"] = int(kv["min_subcarriers"])
    return SystemConfig(**base)


def build_channel(kv: dict, system: SystemConfig) -> ChannelStats:
    return ChannelStats(
        num_paths=int(kv.get("paths", 15)),
        mean_interarrival=float(kv.get("mean_interarrival", 1e-3)),
        decay_db=float(kv.get("decay_db", 20.0)),
        guard=float(kv.get("guard", system.prefix_time)),
        a_max=float(kv.get("channel_a_max", system.a_max)),
    )


def build_experiment(kv: dict, args) -> ExperimentConfig:
    system = build_system(kv)
    shape = None
    if kv.get("oddm_shape"):
        d, dop = kv["oddm_shape"].lower().split("x")
        shape = (int(d), int(dop))
    num_tx = int(kv["num_tx"]) if kv.get("num_tx") else None
    return ExperimentConfig(
        system=system,
        waveforms=tuple(kv.get("waveforms", ",".join(WAVEFORMS)).split(",")),
        alphabet=kv.get("alphabet", "qpsk"),
        snr_db=_floats(kv.get("snr_db", "20,25")),
        trials=int(kv.get("trials", 200)),
        master_seed=args.seed if args.seed is not None
        else int(kv.get("master_seed", 1234)),
        channel=build_channel(kv, system),
        csi_nmse=_floats(kv.get("csi_nmse", "0")),
        num_tx=num_tx,
        hfmc_numerical_h=bool(getattr(args, "numerical_h", False)),
        oddm_shape=shape,
        workers=args.workers if args.workers is not None
        else int(kv.get("workers", 1)),
    )


def _load_keys(args) -> dict:
    kv = dict(_PRESETS.get(args.preset or "", {}))
    if args.config:
        kv.update(parse_config_text(Path(args.config).read_text()))
    return kv


def _params_for(kv: dict, args):
    system = build_system(kv)
    params = select_parameters(system)
    num_tx = int(kv["num_tx"]) if kv.get("num_tx") else None
    if num_tx is not None:
        params = truncate_transmit(params, num_tx)
    return system, params


def _metadata(tag: str, cfg, seed=None):
    meta = [("generator", f"hfmc {__version__}"), ("command", tag),
            ("config_hash", config_hash(cfg))]
    if seed is not None:
        meta.append(("master_seed", seed))
    return meta


def cmd_design(args) -> int:
    kv = _load_keys(args)
    system, params = _params_for(kv, args)
    sheet = design_sheet(system, params)
    eps_lo, eps_hi = epsilon_bounds(system)
    ct_lo, ct_hi = ct0_bounds(system, params.epsilon)
    margins = [
        f"  eps feasible      ({eps_lo:.6g}, {eps_hi:.6g})",
        f"  ct0 feasible      ({ct_lo:.6g}, {ct_hi:.6g}) at the chosen eps",
    ]
    text = sheet + "\n" + "\n".join(margins) + "\n"
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "design.txt").write_text(text)
    return 0


def cmd_ber(args) -> int:
    kv = _load_keys(args)
    cfg = build_experiment(kv, args)
    t0 = time.perf_counter()
    result = run_ber(cfg)
    wall = time.perf_counter() - t0
    out = Path(args.out)
    columns = ["waveform", "snr_db", "csi_nmse", "frames", "bits_total",
               "bits_error", "symbols_total", "symbols_error", "ber", "ser"]
    write_csv(out / "ber.csv", columns, result.rows(),
              _metadata("ber", cfg, cfg.master_seed))
    entries = [("command", "ber"), ("config_hash", config_hash(cfg)),
               ("master_seed", cfg.master_seed), ("wall_time_s", f"{wall:.3f}"),
               ("redraws", result.redraws), ("outputs", "ber.csv")]
    for key, cell in sorted(result.cells.items()):
        entries.append((f"cell_wall_s {key[0]} snr={key[1]:g} nmse={key[2]:g}",
                        f"{cell.wall_time:.3f}"))
    write_manifest(out / "manifest.txt", entries)
    for row in result.rows():
        print(f"{row[0]:5s} snr={row[1]:g} nmse={row[2]:g} ber={row[8]:.6g}")
    return 0


def cmd_spectrum(args) -> int:
    kv = _load_keys(args)
    system, params = _params_for(kv, args)
    resolution = float(kv.get("resolution", 5.0))
    spec = kv.get("subcarriers", "first,middle,last")
    named = {"first": 0, "middle": params.num_tx // 2, "last": params.num_tx - 1}
    subs = [named.get(s.strip(), None) if not s.strip().isdigit() else int(s)
            for s in spec.split(",")]
    if None in subs:
        raise ValueError(f"bad subcarriers spec {spec!r}")
    f_lo = system.f_c - system.bandwidth
    f_hi = system.f_c + system.bandwidth
    rows = []
    summary = []
    for m in subs:
        est = spectrum_dft(params, m, resolution=resolution)
        band = subcarrier_band(params, m)
        keep = (est.freqs >= f_lo) & (est.freqs <= f_hi)
        mags = est.magnitude_db()
        for f, db in zip(est.freqs[keep], mags[keep]):
            rows.append((m, float(f), float(db)))
        summary.append((m, band[0], band[1],
                        out_of_band_fraction(est, band),
                        in_band_deviation_db(est, params, m)))
    out = Path(args.out)
    cfgobj = build_system(kv)
    write_csv(out / "spectrum.csv", ["subcarrier", "freq_hz", "mag_db"], rows,
              _metadata("spectrum", cfgobj))
    write_csv(out / "spectrum_summary.csv",
              ["subcarrier", "band_start_hz", "band_end_hz", "oob_fraction",
               "inband_dev_db"],
              summary, _metadata("spectrum", cfgobj))
    for m, fs, fe, oob, dev in summary:
        print(f"m={m}: band ({fs:.1f}, {fe:.1f}) Hz, "
              f"oob {oob:.4f}, in-band dev {dev:.2f} dB")
    return 0


def cmd_orth(args) -> int:
    kv = _load_keys(args)
    system, params = _params_for(kv, args)
    gram = transmit_gram(params)
    sir = sir_db(params, gram=gram)
    gdb = gram_matrix_db(params)
    rows = [(n, m, float(gdb[n, m]))
            for n in range(params.num_tx) for m in range(params.num_tx)]
    out = Path(args.out)
    write_csv(out / "gram.csv", ["n", "m", "mag_db"], rows,
              _metadata("orth", build_system(kv)))
    mse = approx_mse_db(params, target="theorem1")
    print(f"sir_db={sir:.4f}  approx_mse_db={mse:.4f}")
    write_manifest(out / "manifest.txt",
                   [("command", "orth"), ("sir_db", f"{sir:.6f}"),
                    ("approx_mse_db", f"{mse:.6f}"), ("outputs", "gram.csv")])
    return 0


def cmd_chanmat(args) -> int:
    kv = _load_keys(args)
    system, params = _params_for(kv, args)
    seed = args.seed if args.seed is not None else int(kv.get("master_seed", 1234))
    ch = draw_realization(build_channel(kv, system), np.random.default_rng(seed))
    if getattr(args, "numerical_h", False):
        eq = equivalent_channel_numerical(build_basis("hfmc", params), ch)
    else:
        eq = equivalent_channel_analytic(params, ch, form="exact")
    center, half = band_occupancy(eq)
    rows = [(n, m, float(eq.matrix[n, m].real), float(eq.matrix[n, m].imag))
            for n in range(eq.matrix.shape[0])
            for m in range(eq.matrix.shape[1])]
    out = Path(args.out)
    meta = _metadata("chanmat", build_system(kv), seed)
    meta.append(("row_offset", eq.row_offset))
    meta.append(("construction", eq.construction))
    write_csv(out / "chanmat.csv", ["row", "col", "re", "im"], rows, meta)
    (out / "channel.txt").write_text(realization_to_text(ch))
    print(f"occupancy: center offset {center}, halfwidth {half} "
          f"(construction {eq.construction})")
    write_manifest(out / "manifest.txt",
                   [("command", "chanmat"), ("master_seed", seed),
                    ("occupancy_center", center), ("occupancy_halfwidth", half),
                    ("outputs", "chanmat.csv channel.txt")])
    return 0


def cmd_sweep(args) -> int:
    kv = _load_keys(args)
    out = Path(args.out)
    var = args.variable
    if var == "epsilon":
        system = build_system(kv)
        if kv.get("sweep_values"):
            grid = _floats(kv["sweep_values"])
        else:
            grid = tuple(np.round(np.arange(0.018, 0.0501, 0.004), 6))
        rows = orthogonality_sweep(system, grid)
        write_csv(out / "sweep_epsilon.csv", ["epsilon", "sir_db", "mse_db"],
                  rows, _metadata("sweep epsilon", system))
        for r in rows:
            print(f"eps={r[0]:.4g} sir={r[1]:.3f} mse={r[2]:.3f}")
    elif var == "ct0":
        system = build_system(kv)
        eps = (float(kv["sweep_epsilon"]) if kv.get("sweep_epsilon")
               else select_parameters(system).epsilon)
        vals = _floats(kv["sweep_values"]) if kv.get("sweep_values") else None
        rows = [(r.ct0, r.fm_rate, r.quotient, r.capacity, r.band_halfwidth)
                for r in tradeoff_sweep(system, eps, ct0_values=vals)]
        write_csv(out / "sweep_ct0.csv",
                  ["ct0", "fm_rate", "quotient", "capacity", "band_halfwidth"],
                  rows, _metadata("sweep ct0", system))
        for r in rows:
            print(f"ct0={r[0]:.4g} quotient={r[2]:.3f} capacity={r[3]} "
                  f"band={r[4]:.3f}")
    elif var == "paths":
        grid = ([int(v) for v in _floats(kv["sweep_values"])]
                if kv.get("sweep_values") else [6, 9, 12, 15])
        snr = (float(kv["sweep_snr"]) if kv.get("sweep_snr")
               else _floats(kv.get("snr_db", "25"))[0])
        kv_point = dict(kv)
        kv_point["snr_db"] = f"{snr:g}"
        rows = []
        for count in grid:
            kv_point["paths"] = str(count)
            cfg = build_experiment(kv_point, args)
            result = run_ber(cfg)
            for row in result.rows():
                rows.append((count,) + row)
        write_csv(out / "sweep_paths.csv",
                  ["paths", "waveform", "snr_db", "csi_nmse", "frames",
                   "bits_total", "bits_error", "symbols_total",
                   "symbols_error", "ber", "ser"],
                  rows, _metadata("sweep paths", build_experiment(kv, args)))
        for r in rows:
            print(f"paths={r[0]} {r[1]:5s} ber={r[9]:.6g}")
    elif var == "snr":
        cfg = build_experiment(kv, args)
        result = run_ber(cfg)
        write_csv(out / "sweep_snr.csv",
                  ["waveform", "snr_db", "csi_nmse", "frames", "bits_total",
                   "bits_error", "symbols_total", "symbols_error", "ber",
                   "ser"],
                  result.rows(), _metadata("sweep snr", cfg, cfg.master_seed))
        for row in result.rows():
            print(f"{row[0]:5s} snr={row[1]:g} ber={row[8]:.6g}")
    else:
        raise ValueError(f"unknown sweep variable {var!r}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hfmc",
        description="hyperbolic multicarrier simulation harness")
    parser.add_argument("--version", action="version",
                        version=f"hfmc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, numerical=False):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--preset", choices=sorted(_PRESETS),
                       help="named parameter preset")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed override")
        p.add_argument("--workers", type=int, default=None,
                       help="parallel worker count")
        p.add_argument("--out", default="hfmc_out", help="output directory")
        if numerical:
            p.add_argument("--numerical-h", action="store_true",
                           dest="numerical_h",
                           help="build the hyperbolic equivalent channel by "
                                "quadrature instead of the analytic form")

    common(sub.add_parser("design", help="run parameter selection"))
    common(sub.add_parser("ber", help="Monte Carlo BER"), numerical=True)
    common(sub.add_parser("spectrum", help="per-subcarrier spectra"))
    common(sub.add_parser("orth", help="Gram matrix and SIR"))
    common(sub.add_parser("chanmat", help="equivalent channel of one draw"),
           numerical=True)
    sweep_p = sub.add_parser("sweep", help="one-variable sweeps")
    sweep_p.add_argument("--variable", required=True,
                         choices=["epsilon", "ct0", "paths", "snr"])
    common(sweep_p)

    args = parser.parse_args(argv)
    handlers = {"design": cmd_design, "ber": cmd_ber, "spectrum": cmd_spectrum,
                "orth": cmd_orth, "chanmat": cmd_chanmat, "sweep": cmd_sweep}
    try:
        return handlers[args.command](args)
    except (InfeasibleDesignError, ValueError, AssertionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
