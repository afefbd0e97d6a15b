"""Command-line entry point: ``nomakit <command> [--config cfg.json] [flags]``.

Every option can also come from the JSON config file (keys are the option
names with dashes replaced by underscores); flags win over the file. Output
goes to ``--out`` or ``$NOMAKIT_OUT_DIR/<command>.csv``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import anoma, rates, scenarios
from .constellation import (PowerSplit, UnsupportedOrderError, distinct_count, make_standard,
                            min_distance, rotate, superimpose, write_super_csv)
from .sim import SimConfig, run_ber

log = logging.getLogger("nomakit")

OUT_DIR_ENV = "NOMAKIT_OUT_DIR"


class ValidationError(ValueError):
    pass


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _complex_rows(rows) -> np.ndarray:
    return np.array([[complex(str(v).replace("i", "j")) for v in row] for row in rows], dtype=complex)


DEFAULTS = {
    "constellation": dict(kind="PSK", order=4, kind2=None, order2=None, alpha=0.2, power=1.0,
                          rotation=0.0, tol=1e-9),
    "rate-region": dict(scheme="mac", p1=10.0, p2=10.0, g1sq=1.0, g2sq=0.2, sigma2=1.0, grid=9,
                        tau=0.5, beta=0.5, frame_length=512,
                        convention="real_bandwidth_normalized", receiver="sic",
                        channels=None),
    "ber": dict(scenario="noma-ml", snr_grid="0,4,8,12", alpha=0.2, max_trials=10_000_000,
                target_errors=100, p1=0.3, p2=1.0, g1sq=2.0, g2sq=1.0, rotation=math.pi / 8,
                frames=200, steps=100, symbols=4096),
    "tcm-ber": dict(snr_grid="6,8,10,12", max_trials=10_000_000, target_errors=100,
                    p1=0.3, p2=1.0, g1sq=2.0, g2sq=1.0, rotation=math.pi / 8,
                    frames=200, steps=100),
}
DEFAULTS["rsma-region"] = dict(DEFAULTS["rate-region"], scheme="rsma-ul", grid=11)
COMMON = dict(seed=0, workers=1)


def _writer(path: Path):
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def _fmt(x: float) -> str:
    return repr(float(x))


def cmd_constellation(cfg: dict, out: Path) -> str:
    c1 = make_standard(cfg["kind"], int(cfg["order"]))
    c2 = make_standard(cfg["kind2"] or cfg["kind"], int(cfg["order2"] or cfg["order"]))
    c2 = rotate(c2, float(cfg["rotation"]))
    sc = superimpose(c1, c2, PowerSplit(float(cfg["alpha"]), float(cfg["power"])))
    write_super_csv(sc, out)
    return f"distinct={distinct_count(sc, float(cfg['tol']))} min_distance={min_distance(sc):.6g}"


def _rate_rows(cfg: dict):
    scheme = cfg["scheme"]
    p1, p2, g1, g2, s2 = (float(cfg[k]) for k in ("p1", "p2", "g1sq", "g2sq", "sigma2"))
    grid = int(cfg["grid"])
    if scheme == "mac":
        a, b = rates.mac_region_vertices(p1, p2, g1, g2, s2)
        return ["param", "rate_user1", "rate_user2", "sum"], [
            ["A", *map(_fmt, a.per_user), _fmt(a.sum)],
            ["B", *map(_fmt, b.per_user), _fmt(b.sum)]]
    if scheme == "noma-dl":
        if g1 < g2:
            raise ValidationError("noma-dl expects g1sq >= g2sq (user 1 strongest)")
        rows = []
        for alpha in np.linspace(0.0, 1.0, grid):
            rp = rates.noma_downlink_rates([alpha * (p1 + p2), (1 - alpha) * (p1 + p2)], [g1, g2], s2)
            rows.append([_fmt(alpha), *map(_fmt, rp.per_user), _fmt(rp.sum)])
        return ["param", "rate_user1", "rate_user2", "sum"], rows
    if scheme == "rsma-ul":
        rows = []
        for q, rp in zip(np.linspace(0.0, p1, grid), rates.rsma_uplink_split_sweep(p1, p2, g1, g2, s2, grid)):
            rows.append([_fmt(q), *map(_fmt, rp.per_user), _fmt(rp.sum)])
        return ["param", "rate_user1", "rate_user2", "sum"], rows
    if scheme == "rsma-dl":
        if cfg.get("channels") is None:
            raise ValidationError("rsma-dl is missing required fields: channels")
        H = _complex_rows(cfg["channels"])
        K = H.shape[0]
        total = p1 + p2
        pc_dir = H.sum(axis=0) / np.linalg.norm(H.sum(axis=0))
        priv_dir = H / np.linalg.norm(H, axis=1, keepdims=True)
        rows = []
        for rho in np.linspace(0.0, 1.0, grid):
            rc = rates.RsmaDownConfig(H, math.sqrt(rho * total) * pc_dir,
                                      math.sqrt((1 - rho) * total / K) * priv_dir, s2)
            _, _, tot = rates.rsma_downlink_rates(rc)
            rows.append([_fmt(rho), *map(_fmt, tot[:2]), _fmt(math.fsum(tot))])
        return ["param", "rate_user1", "rate_user2", "sum"], rows
    if scheme == "anoma":
        pulse = anoma.PulseShape(float(cfg["beta"]))
        conv = anoma.RateConvention(cfg["convention"])
        N = int(cfg["frame_length"])
        budget = p1 + p2
        rows = []
        for i in range(grid):
            alpha = (i + 1) / (grid + 1)
            model = anoma.build_virtual_mimo([math.sqrt(g1), math.sqrt(g2)],
                                             [alpha * budget, (1 - alpha) * budget],
                                             anoma.DelayProfile((0.0, float(cfg["tau"]))), pulse, N)
            for order in ((0, 1), (1, 0)):
                r = anoma.gaussian_rates(model, order, s2, conv, cfg["receiver"])
                rows.append([_fmt(alpha), "".join(str(k + 1) for k in order),
                             _fmt(r[0]), _fmt(r[1]), _fmt(math.fsum(r))])
        return ["alpha", "order", "rate_user1", "rate_user2", "sum_rate"], rows
    raise ValidationError(f"unknown scheme {scheme!r}")


def cmd_rate_region(cfg: dict, out: Path) -> str:
    header, rows = _rate_rows(cfg)
    fh, w = _writer(out)
    with fh:
        w.writerow(header)
        w.writerows(rows)
    return f"rows={len(rows)}"


def _scenario(cfg: dict):
    name = cfg["scenario"]
    gains2 = (float(cfg["g1sq"]), float(cfg["g2sq"]))
    if name in ("noma-ml", "noma-sic"):
        return scenarios.noma_qpsk(name.split("-")[1], float(cfg["alpha"]),
                                   gains=tuple(math.sqrt(g) for g in gains2),
                                   n_symbols=int(cfg["symbols"]))
    if name == "tcm":
        return scenarios.tcm_single(int(cfg["frames"]), int(cfg["steps"]))
    if name in ("tcnoma-joint", "tcnoma-sic", "uncoded", "tcma"):
        return scenarios.tcnoma(name, float(cfg["p1"]), float(cfg["p2"]), gains2,
                                float(cfg["rotation"]), int(cfg["frames"]), int(cfg["steps"]))
    if name == "lds-mmse":
        return scenarios.lds_mmse(n_uses=int(cfg["symbols"]))
    raise ValidationError(f"unknown scenario {name!r}")


def _sim_config(cfg: dict) -> SimConfig:
    return SimConfig(tuple(_floats(cfg["snr_grid"])), int(cfg["max_trials"]),
                     int(cfg["target_errors"]), int(cfg["seed"]), workers=int(cfg["workers"]))


def cmd_ber(cfg: dict, out: Path) -> str:
    curve = run_ber(_scenario(cfg), _sim_config(cfg))
    curve.to_csv(out)
    return "ber=" + ";".join(",".join(f"{b:.3g}" for b in p.ber) for p in curve.points)


def cmd_tcm_ber(cfg: dict, out: Path) -> str:
    sim = _sim_config(cfg)
    fh, w = _writer(out)
    with fh:
        w.writerow(["snr_db", "ber_user1", "ber_user2", "scheme"])
        for scheme in scenarios.TCNOMA_SCHEMES:
            scen = scenarios.tcnoma(scheme, float(cfg["p1"]), float(cfg["p2"]),
                                    (float(cfg["g1sq"]), float(cfg["g2sq"])),
                                    float(cfg["rotation"]), int(cfg["frames"]), int(cfg["steps"]))
            for p in run_ber(scen, sim).points:
                w.writerow([_fmt(p.snr_db), _fmt(p.ber[0]), _fmt(p.ber[1]), scheme])
    return f"schemes={len(scenarios.TCNOMA_SCHEMES)}"


COMMANDS = {
    "constellation": cmd_constellation,
    "rate-region": cmd_rate_region,
    "rsma-region": cmd_rate_region,
    "ber": cmd_ber,
    "tcm-ber": cmd_tcm_ber,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nomakit", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def common(sp):
        sp.add_argument("--config", default=S, help="JSON file with option values")
        sp.add_argument("--seed", type=int, default=S)
        sp.add_argument("--out", default=S)
        sp.add_argument("--workers", type=int, default=S)

    sp = sub.add_parser("constellation", help="two-user super-constellation CSV")
    common(sp)
    sp.add_argument("--kind", choices=["BPSK", "PSK", "QAM"], type=str.upper, default=S)
    sp.add_argument("--order", type=int, default=S)
    sp.add_argument("--kind2", choices=["BPSK", "PSK", "QAM"], type=str.upper, default=S)
    sp.add_argument("--order2", type=int, default=S)
    sp.add_argument("--alpha", type=float, default=S)
    sp.add_argument("--power", type=float, default=S)
    sp.add_argument("--rotation", type=float, default=S, help="radians, applied to user 2")
    sp.add_argument("--tol", type=float, default=S)

    for name, schemes in (("rate-region", ["noma-dl", "mac", "anoma", "rsma-dl", "rsma-ul"]),
                          ("rsma-region", ["rsma-dl", "rsma-ul"])):
        sp = sub.add_parser(name, help="achievable-rate sweep CSV")
        common(sp)
        sp.add_argument("--scheme", choices=schemes, default=S)
        for opt in ("p1", "p2", "g1sq", "g2sq", "sigma2", "tau", "beta"):
            sp.add_argument(f"--{opt}", type=float, default=S)
        sp.add_argument("--grid", type=int, default=S)
        sp.add_argument("--frame-length", type=int, default=S)
        sp.add_argument("--convention", choices=[c.value for c in anoma.RateConvention], default=S)
        sp.add_argument("--receiver", choices=["sic", "branch", "joint"], default=S)

    for name in ("ber", "tcm-ber"):
        sp = sub.add_parser(name, help="Monte Carlo BER CSV")
        common(sp)
        if name == "ber":
            sp.add_argument("--scenario", default=S, choices=[
                "noma-sic", "noma-ml", "tcm", "tcnoma-joint", "tcnoma-sic", "uncoded", "tcma", "lds-mmse"])
            sp.add_argument("--alpha", type=float, default=S)
            sp.add_argument("--symbols", type=int, default=S)
        sp.add_argument("--snr-grid", default=S, help="comma separated dB values")
        sp.add_argument("--max-trials", type=int, default=S)
        sp.add_argument("--target-errors", type=int, default=S)
        for opt in ("p1", "p2", "g1sq", "g2sq", "rotation"):
            sp.add_argument(f"--{opt}", type=float, default=S)
        sp.add_argument("--frames", type=int, default=S)
        sp.add_argument("--steps", type=int, default=S)
    return p


def resolve_config(command: str, flags: dict) -> dict:
    cfg = dict(COMMON, **DEFAULTS[command])
    if "config" in flags:
        path = Path(flags["config"])
        try:
            file_cfg = json.loads(path.read_text())
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
        unknown = set(file_cfg) - set(cfg) - {"out"}
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(file_cfg)
    cfg.update({k: v for k, v in flags.items() if k != "config"})
    return cfg


def output_path(command: str, cfg: dict) -> Path:
    if cfg.get("out"):
        return Path(cfg["out"])
    return Path(os.environ.get(OUT_DIR_ENV, ".")) / f"{command}.csv"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "verbose")}
    try:
        cfg = resolve_config(args.command, flags)
        out = output_path(args.command, cfg)
        log.info("resolved config for %s: %s", args.command, json.dumps(cfg, sort_keys=True, default=str))
        summary = COMMANDS[args.command](cfg, out)
    except (ValidationError, UnsupportedOrderError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"nomakit {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"nomakit {args.command}: I/O error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        log.exception("runtime failure")
        print(f"nomakit {args.command}: runtime error: {exc}", file=sys.stderr)
        return 1
    print(summary)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
