"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 data/parse error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path
from typing import Optional, Sequence


from uwnetloc import __version__, fileio, network, sim, srls
from uwnetloc.channel_model import (
    DEFAULT_P_TX,
    DEFAULT_SIGMA_D,
    ChannelModel,
    fit_linear_model,
)
from uwnetloc.errors import DataError, NumericalError
from uwnetloc.selfloc import SelfLocConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

# config-file key -> value parser; keys double as argparse dests
_CFG_KEYS = {
    "max_iters": int,
    "inner_tol": float,
    "inner_max_iters": int,
    "packet_loss_prob": float,
    "proximal_tau": float,
    "init_box": lambda s: tuple(float(v) for v in s.split(",")),
    "seed": int,
    "sigma_d": float,
    "loss_levels": lambda s: [float(v) for v in s.split(",")],
    "n_seeds": int,
    "step": float,
    "mode": str,
    "p_tx": float,
}


class UsageError(Exception):
    pass


def _floats(s: str) -> list[float]:
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def _ints(s: str) -> list[int]:
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _box(s: str) -> tuple[float, ...]:
    vals = _floats(s)
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("init box needs xmin,xmax,ymin,ymax")
    return tuple(vals)


def _add_selfloc_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", type=Path, help="scenario CSV (default: 27-node reference grid)")
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--inner-tol", dest="inner_tol", type=float)
    p.add_argument("--inner-max-iters", dest="inner_max_iters", type=int)
    p.add_argument("--loss", dest="packet_loss_prob", type=float, help="broadcast loss probability")
    p.add_argument("--tau", dest="proximal_tau", type=float, help="proximal coefficient")
    p.add_argument("--init-box", dest="init_box", type=_box, help="xmin,xmax,ymin,ymax")
    p.add_argument("--sigma-d", dest="sigma_d", type=float, help="range noise std in metres")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="64-bit seed for every random stream")
    common.add_argument("--config", type=Path, help="key = value parameter file")

    parser = argparse.ArgumentParser(prog="uwnetloc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"uwnetloc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-channel", parents=[common], help="fit the dB path-loss line")
    p.add_argument("samples", nargs="?", type=Path, help="CSV with header distance_m,gain_db")
    p.add_argument("--defaults", action="store_true", help="use the published calibration constants")
    p.add_argument("--out", type=Path, help="channel model file to write")

    p = sub.add_parser("gen-scenario", parents=[common], help="write a grid scenario")
    p.add_argument("--rows", type=int, default=network.REF_ROWS)
    p.add_argument("--cols", type=int, default=network.REF_COLS)
    p.add_argument("--spacing", type=float, default=network.REF_SPACING)
    p.add_argument("--anchors", type=_ints, help="comma-separated node ids (default: corners)")
    p.add_argument("--comm-radius", type=float, default=network.REF_COMM_RADIUS)
    p.add_argument("--sense-radius", type=float, default=network.REF_SENSE_RADIUS)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("selfloc", parents=[common], help="run distributed self-localization")
    _add_selfloc_flags(p)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("sweep", parents=[common], help="MAE curves across packet-loss levels")
    _add_selfloc_flags(p)
    p.add_argument("--levels", dest="loss_levels", type=_floats, help="comma-separated loss probabilities")
    p.add_argument("--n-seeds", dest="n_seeds", type=int)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("track", parents=[common], help="track a moving target with SR-LS")
    p.add_argument("--scenario", type=Path)
    p.add_argument("--trajectory", type=Path, help="waypoint CSV x_m,y_m (default: serpentine)")
    p.add_argument("--step", type=float, help="sample spacing along the path in metres")
    p.add_argument("--sigma-d", dest="sigma_d", type=float)
    p.add_argument("--mode", choices=["distance", "db"])
    p.add_argument("--channel", type=Path, help="channel model file for --mode db")
    p.add_argument("--p-tx", dest="p_tx", type=float)
    p.add_argument("--out", type=Path, required=True, help="tracking CSV to write")

    p = sub.add_parser("srls", parents=[common], help="solve one SR-LS instance")
    p.add_argument("instance", type=Path, help="CSV with header x_m,y_m,range_m")
    p.add_argument("--eps", type=float, default=srls.DEFAULT_EPS)
    return parser


def _resolve(args, keys: Sequence[str], defaults: dict) -> dict:
    """defaults < config file < explicit flags."""
    out = dict(defaults)
    if getattr(args, "config", None) is not None:
        for k, v in fileio.read_kv(args.config).items():
            if k not in keys:
                raise UsageError(f"{args.config}: unknown key {k!r}")
            try:
                out[k] = _CFG_KEYS[k](v)
            except ValueError:
                raise fileio.ParseError(f"{args.config}: bad value for {k}: {v!r}") from None
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    return out


def _selfloc_params(args, extra: Optional[dict] = None) -> dict:
    cfg_defaults = {f.name: f.default for f in fields(SelfLocConfig)}
    defaults = {**cfg_defaults, "sigma_d": DEFAULT_SIGMA_D, **(extra or {})}
    return _resolve(args, list(defaults), defaults)


def _scenario(path: Optional[Path]) -> network.Scenario:
    return network.reference_scenario() if path is None else fileio.read_scenario(path)


def _config(params: dict) -> SelfLocConfig:
    names = {f.name for f in fields(SelfLocConfig)}
    return SelfLocConfig(**{k: v for k, v in params.items() if k in names})


def _echo_params(params: dict, **more) -> dict:
    out = {k: (",".join(fmt_num(x) for x in v) if isinstance(v, (tuple, list)) else v)
           for k, v in params.items()}
    out.update(more)
    return out


def fmt_num(x) -> str:
    return fileio.fmt(x)


def cmd_fit_channel(args) -> int:
    if args.defaults:
        model = ChannelModel()
    elif args.samples is None:
        raise UsageError("fit-channel needs a samples CSV or --defaults")
    else:
        model = fit_linear_model(fileio.read_gain_samples(args.samples))
    if args.out is not None:
        fileio.save_channel_model(args.out, model)
    print(f"slope_a_db_per_m = {fmt_num(model.slope_a)}")
    print(f"intercept_b_db = {fmt_num(model.intercept_b)}")
    print(f"noise_var_db2 = {fmt_num(model.noise_var)}")
    return EXIT_OK


def cmd_gen_scenario(args) -> int:
    anchors = args.anchors if args.anchors is not None else network.corner_ids(args.rows, args.cols)
    sc = network.build_grid(args.rows, args.cols, args.spacing, anchors, args.comm_radius, args.sense_radius)
    params = {
        "rows": args.rows, "cols": args.cols, "spacing": args.spacing,
        "anchors": ",".join(str(a) for a in sorted(sc.anchors)),
        "comm_radius": args.comm_radius, "sense_radius": args.sense_radius,
    }
    fileio.write_scenario(args.out, sc, params)
    print(f"wrote {sc.n_nodes} nodes ({len(sc.anchors)} anchors) to {args.out}")
    return EXIT_OK


def cmd_selfloc(args) -> int:
    params = _selfloc_params(args)
    sc = _scenario(args.scenario)
    cfg = _config(params)
    trace = sim.run_selfloc(sc, params["sigma_d"], cfg)
    echo = _echo_params(params, scenario=str(args.scenario or "reference"))
    fileio.write_trace(args.out, trace, echo)
    print(f"initial_mae_m = {fmt_num(trace.mae[0])}")
    print(f"final_mae_m = {fmt_num(trace.mae[-1])}")
    print(f"final_objective = {fmt_num(trace.objective[-1])}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    params = _selfloc_params(args, {"loss_levels": [0.0, 0.05, 0.1, 0.2], "n_seeds": 50})
    sc = _scenario(args.scenario)
    cfg = _config(params)
    curves = sim.run_selfloc_experiment(sc, params["loss_levels"], params["n_seeds"], cfg, params["sigma_d"])
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    echo = _echo_params(params, scenario=str(args.scenario or "reference"))
    fileio.write_curves(out_dir / "selfloc_curves.csv", curves, echo)
    for p, c in curves.items():
        print(f"loss {fmt_num(p)}: final_mae_m = {fmt_num(c[-1])}")
    return EXIT_OK


def cmd_track(args) -> int:
    defaults = {"seed": 0, "sigma_d": DEFAULT_SIGMA_D, "step": sim.REFERENCE_STEP,
                "mode": "distance", "p_tx": DEFAULT_P_TX}
    params = _resolve(args, list(defaults), defaults)
    sc = _scenario(args.scenario)
    model = fileio.load_channel_model(args.channel) if args.channel else ChannelModel()
    if args.trajectory is not None:
        traj = sim.make_trajectory(fileio.read_points(args.trajectory), params["step"])
    else:
        traj = sim.reference_trajectory(sc, params["step"])
    run = sim.run_tracking(sc, traj, params["sigma_d"], params["seed"], params["mode"], model, params["p_tx"])
    echo = _echo_params(
        params,
        scenario=str(args.scenario or "reference"),
        trajectory=str(args.trajectory or "reference"),
        channel=str(args.channel or "default"),
    )
    fileio.write_tracking(args.out, run, echo)
    mae = run.mae
    print(f"mae_m = {'absent' if mae is None else fmt_num(mae)}")
    print(f"flagged = {int(run.flagged.sum())}/{len(run.flagged)}")
    return EXIT_OK


def cmd_srls(args) -> int:
    anchors, ranges = fileio.read_srls_instance(args.instance)
    try:
        inp = srls.SrlsInput(anchors, ranges)
    except ValueError as exc:
        raise fileio.ParseError(f"{args.instance}: {exc}") from None
    res = srls.solve_detailed(inp, args.eps)
    print("x_est_m,y_est_m,lambda_star,phi_residual")
    print(",".join(fmt_num(v) for v in (res.position[0], res.position[1], res.lambda_star, res.phi_residual)))
    return EXIT_OK


COMMANDS = {
    "fit-channel": cmd_fit_channel,
    "gen-scenario": cmd_gen_scenario,
    "selfloc": cmd_selfloc,
    "sweep": cmd_sweep,
    "track": cmd_track,
    "srls": cmd_srls,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
