"""Command-line entry point wiring the full pipeline.

Subcommands: lattice-info, ed, vqe-sweep, observables, circuit-emit,
noisy-run, fss-fit.  Every run writes its artifacts plus a manifest
(config echo, seed, package versions, wall time) into the output
directory; identical configs reproduce byte-identical CSV content.

Exit codes: 0 success, 2 configuration error, 1 runtime failure.
"""

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, circuits, dual_engine as de, noisy, scaling, \
    spectra, vqe
from .lattice import build_lattice


class ConfigError(Exception):
    pass


def _out_dir(args) -> str:
    out = args.out or os.environ.get("Z2VQE_OUT", ".")
    os.makedirs(out, exist_ok=True)
    return out


def _write_manifest(out: str, name: str, config: dict, t0: float) -> None:
    manifest = {
        "subcommand": name,
        "config": config,
        "versions": {"z2vqe": __version__, "numpy": np.__version__},
        "wall_time_s": round(time.time() - t0, 3),
    }
    with open(os.path.join(out, f"{name}_manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.12g}" if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def _parse_grid(spec: str) -> np.ndarray:
    """Grid syntax: 'a:b:n' for n points from a to b, or comma list."""
    if ":" in spec:
        a, b, n = spec.split(":")
        return np.linspace(float(a), float(b), int(n))
    return np.array([float(x) for x in spec.split(",")], dtype=float)


def cmd_lattice_info(args) -> int:
    g = build_lattice(args.d)
    out = _out_dir(args)
    with open(os.path.join(out, f"lattice_d{args.d}.json"), "w") as fh:
        json.dump(g.to_dict(), fh, indent=2)
    print(f"d={args.d}: {g.n_links} links, {g.n_plaquettes} plaquettes, "
          f"{len(g.vertices)} vertices")
    return 0


def cmd_ed(args) -> int:
    g = build_lattice(args.d)
    grid = _parse_grid(args.lam)
    out = _out_dir(args)
    rows = []

    def solve(lam):
        e0, st = spectra.ground_state(g, float(lam))
        m = de.bulk_average_magnetization(st)
        st_t = np.nan
        if args.topo and g.n_plaquettes <= 12:
            a, b, c = de.default_topo_partition(g)
            st_t = de.topological_entropy(st, a, b, c)
        return [float(lam), e0, m, st_t]

    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        rows = list(pool.map(solve, grid))
    _write_csv(os.path.join(out, f"ed_d{args.d}.csv"),
               ["lambda", "energy", "magnetization", "topo_entropy"], rows)
    _write_manifest(out, "ed", vars(args), args._t0)
    print(f"wrote ed_d{args.d}.csv ({len(rows)} rows)")
    return 0


_PRESETS = {
    "desk": {"sweep": vqe.DESK_PRESET, "trajectories": 2000, "shots": 100},
    "paper": {"sweep": vqe.PAPER_PRESET, "trajectories": 100000,
              "shots": 100},
}


def cmd_vqe_sweep(args) -> int:
    if args.preset not in _PRESETS:
        raise ConfigError(f"unknown preset {args.preset!r}")
    g = build_lattice(args.d)
    spec = vqe.AnsatzSpec(args.ansatz, args.layers)
    preset = _PRESETS[args.preset]["sweep"]
    grid = _parse_grid(args.lam) if args.lam else None
    result = vqe.sweep(g, spec, preset=preset, seed=args.seed,
                       lam_grid=grid)
    out = _out_dir(args)
    rows = []
    for i, lam in enumerate(result.lambdas):
        e_ed = np.nan
        if args.reference and g.n_plaquettes <= 20:
            e_ed, _ = spectra.ground_state(g, float(lam))
        rows.append([float(lam), float(result.energies[i]), e_ed]
                    + [float(x) for x in result.params[i]])
    hdr = (["lambda", "energy", "ed_energy"]
           + [f"param{j}" for j in range(spec.n_params)])
    tag = f"{args.ansatz}_d{args.d}_l{args.layers}"
    _write_csv(os.path.join(out, f"sweep_{tag}.csv"), hdr, rows)
    _write_manifest(out, "vqe_sweep", vars(args), args._t0)
    if args.reference:
        ref = np.array([r[2] for r in rows])
        err = np.max(np.abs((np.array([r[1] for r in rows]) - ref)
                            / np.abs(ref)))
        print(f"max relative energy error: {err:.3e}")
    print(f"wrote sweep_{tag}.csv")
    return 0


def cmd_observables(args) -> int:
    g = build_lattice(args.d)
    spec = vqe.AnsatzSpec(args.ansatz, args.layers)
    data = np.loadtxt(args.params, delimiter=",", skiprows=1)
    out = _out_dir(args)
    rows = []
    for row in np.atleast_2d(data):
        lam, params = float(row[0]), row[3:3 + spec.n_params]
        st = vqe.prepare(g, spec, params)
        m = de.bulk_average_magnetization(st)
        a, b, c = de.default_topo_partition(g)
        topo = (de.topological_entropy(st, a, b, c)
                if g.n_plaquettes <= 12 else np.nan)
        rows.append([lam, de.energy(st, lam), m, topo])
    _write_csv(os.path.join(out, f"observables_d{args.d}.csv"),
               ["lambda", "energy", "magnetization", "topo_entropy"], rows)
    _write_manifest(out, "observables", vars(args), args._t0)
    print(f"wrote observables_d{args.d}.csv ({len(rows)} rows)")
    return 0


def cmd_circuit_emit(args) -> int:
    g = build_lattice(args.d)
    params = np.array(json.loads(args.params), dtype=float)
    circ = circuits.build_dva_circuit(g, params, args.layers)
    out = _out_dir(args)
    path = os.path.join(out, f"circuit_d{args.d}_l{args.layers}.json")
    with open(path, "w") as fh:
        json.dump(circ.to_dict(), fh, indent=2)
    print(f"depth={circ.depth} cnots={circ.cnot_count} -> {path}")
    _write_manifest(out, "circuit_emit", vars(args), args._t0)
    return 0


def cmd_noisy_run(args) -> int:
    g = build_lattice(args.d)
    params_by_layers = {int(k): np.array(v, dtype=float)
                        for k, v in json.loads(args.params).items()}
    p_grid = _parse_grid(args.p)
    preset = _PRESETS[args.preset]
    n_traj = args.trajectories or preset["trajectories"]
    shots = args.shots or preset["shots"]
    out = _out_dir(args)
    rows = []
    for l, params in sorted(params_by_layers.items()):
        for pi, p in enumerate(p_grid):
            cfg = noisy.ExperimentConfig(
                d=args.d, layers=l, params=params, lam=args.lam,
                p=float(p), n_trajectories=n_traj, shots=shots,
                seed=args.seed + 10000 * l + 100 * pi,
                post_select=not args.no_post_select)
            res = noisy.estimate_energy(g, cfg)
            rows.append([float(p), l, res.energy, res.energy_stderr,
                         res.rejection_rate, res.kept, res.total])
    _write_csv(os.path.join(out, "noisy.csv"),
               ["p", "layers", "energy", "stderr", "rejection_rate",
                "kept", "total"], rows)
    _write_manifest(out, "noisy_run", vars(args), args._t0)
    print(f"wrote noisy.csv ({len(rows)} rows)")
    return 0


def cmd_fss_fit(args) -> int:
    curves = []
    for path in args.curves:
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        li, mi = header.index("lambda"), header.index("magnetization")
        d = int(json.loads(args.sizes)[os.path.basename(path)]) \
            if args.sizes else int("".join(ch for ch in
                                           os.path.basename(path)
                                           if ch.isdigit())[:1])
        curves.append(scaling.MagnetizationCurve(
            "file", d, data[:, li], data[:, mi]))
    summary = scaling.analyze(curves, theta=args.theta)
    out = _out_dir(args)
    payload = {
        "lambda_c": summary.lambda_c, "nu": summary.nu,
        "beta": summary.beta, "theta": args.theta,
        "collapse_score": scaling.collapse_score(
            curves, summary.lambda_c, summary.nu, summary.beta),
        "peaks": {d: {"lambda": p.lam, "chi": p.chi,
                      "censored": p.censored}
                  for d, p in summary.peaks.items()},
    }
    with open(os.path.join(out, "fss.json"), "w") as fh:
        json.dump(payload, fh, indent=2)
    _write_manifest(out, "fss_fit", vars(args), args._t0)
    print(f"lambda_c={summary.lambda_c:.4f} nu={summary.nu:.4f} "
          f"beta={summary.beta:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="z2vqe",
                                 description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--config", default=None,
                        help="key=value defaults file; explicit flags win")
    sub = ap.add_subparsers(dest="cmd", required=True,
                            parser_class=lambda **kw: argparse.ArgumentParser(
                                parents=[common], **kw))

    p = sub.add_parser("lattice-info")
    p.add_argument("--d", type=int, required=True)
    p.set_defaults(fn=cmd_lattice_info)

    p = sub.add_parser("ed")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--lambda", "--lam", dest="lam", required=True,
                   help="'a:b:n' or comma list")
    p.add_argument("--topo", action="store_true")
    p.set_defaults(fn=cmd_ed)

    p = sub.add_parser("vqe-sweep")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--ansatz", default="dva",
                   choices=["dva", "hva_e", "hva_b", "beta_only"])
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--preset", default="desk")
    p.add_argument("--lambda", "--lam", dest="lam", default=None)
    p.add_argument("--reference", action="store_true",
                   help="also solve ED per grid point")
    p.set_defaults(fn=cmd_vqe_sweep)

    p = sub.add_parser("observables")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--ansatz", default="dva")
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--params", required=True, help="sweep CSV path")
    p.set_defaults(fn=cmd_observables)

    p = sub.add_parser("circuit-emit")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--layers", type=int, required=True)
    p.add_argument("--params", required=True, help="JSON parameter list")
    p.set_defaults(fn=cmd_circuit_emit)

    p = sub.add_parser("noisy-run")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--lambda", "--lam", dest="lam", type=float,
                   required=True)
    p.add_argument("--params", required=True,
                   help='JSON {"layers": [params...], ...}')
    p.add_argument("--p", required=True, help="error-rate grid")
    p.add_argument("--preset", default="desk")
    p.add_argument("--trajectories", type=int, default=None)
    p.add_argument("--shots", type=int, default=None)
    p.add_argument("--no-post-select", action="store_true")
    p.set_defaults(fn=cmd_noisy_run)

    p = sub.add_parser("fss-fit")
    p.add_argument("--curves", nargs="+", required=True)
    p.add_argument("--theta", type=float, default=scaling.THETA)
    p.add_argument("--sizes", default=None,
                   help="JSON {filename: d} when not inferable")
    p.set_defaults(fn=cmd_fss_fit)
    return ap


def _inject_config(argv: list[str]) -> list[str]:
    """Expand `--config file` into flag tokens placed right after the
    subcommand, so explicitly passed flags (parsed later) win."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    path = argv[i + 1]
    tokens: list[str] = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, val = line.partition("=")
            key, val = key.strip().replace("_", "-"), val.strip()
            if val.lower() == "true":
                tokens.append(f"--{key}")
            else:
                tokens.extend([f"--{key}", val])
    return argv[:1] + tokens + argv[1:]


def main(argv=None) -> int:
    ap = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    try:
        argv = _inject_config(list(argv))
        args = ap.parse_args(argv)
    except (OSError, IndexError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    args._t0 = time.time()
    try:
        return args.fn(args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
