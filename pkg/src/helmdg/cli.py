"""Command-line driver.

    helmdg study --k 10,50 --mu 0 --rho0 5 --mesh regular --n 4,8,16,32,64 \
                 --lambda first --estimator richardson --tol 1e-10 --out results.csv
    helmdg dump-mesh --mesh regular --n 8 --out mesh.txt
    helmdg dump-system --mesh regular --n 4 --k 10 --mu 0 --rho0 5 --out system.txt
    helmdg mesh-audit --mesh perturbed --n 8,16,32 --delta 0.2 --exponent 0.5
    helmdg rates --csv results.csv

``study`` also accepts ``--config file.json`` with the same keys as the flags;
explicit flags override file values.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .dg import assemble_system
from .mesh import build_mesh, estimate_alpha, measure_mesh_condition, write_mesh_text
from .study import (CSV_HEADER, StudyConfig, StudyConfigError, compute_rates,
                    read_csv, run_study, summary_table, write_csv)


def _floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok != ""]


def _ints(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok != ""]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="helmdg",
                                 description="DG Helmholtz convergence studies "
                                             "with gradient recovery")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    st = sub.add_parser("study", help="run a (k, mu, N) convergence sweep")
    st.add_argument("--config", help="JSON config file; flags override its keys")
    st.add_argument("--k", type=_floats, default=None, help="comma-separated wave numbers")
    st.add_argument("--mu", type=_floats, default=None, help="comma-separated penalty exponents")
    st.add_argument("--rho0", type=float, default=None, help="penalty weight (default 5)")
    st.add_argument("--mesh", default=None, choices=["regular", "chevron", "perturbed"])
    st.add_argument("--n", type=_ints, default=None, help="comma-separated mesh sizes N")
    st.add_argument("--lambda", dest="lambda_policy", default=None,
                    choices=["first", "average"])
    st.add_argument("--estimator", default=None, choices=["richardson", "ppr"])
    st.add_argument("--tol", type=float, default=None)
    st.add_argument("--out", default=None)
    st.add_argument("--seed", type=int, default=None)
    st.add_argument("--delta", type=float, default=None, help="perturbation amplitude")
    st.add_argument("--exponent", type=float, default=None, help="perturbation exponent q")
    st.add_argument("--norm-literal", action="store_true", default=None,
                    help="use the value-based (printed) 1,h-norm instead of the gradient one")
    st.add_argument("--allow-large", action="store_true", default=None,
                    help="allow N beyond 256 (memory warning applies)")

    dm = sub.add_parser("dump-mesh", help="write a mesh in the plain-text format")
    dm.add_argument("--mesh", default="regular", choices=["regular", "chevron", "perturbed"])
    dm.add_argument("--n", type=int, required=True)
    dm.add_argument("--seed", type=int, default=0)
    dm.add_argument("--delta", type=float, default=0.0)
    dm.add_argument("--exponent", type=float, default=0.0)
    dm.add_argument("--out", required=True)

    ds = sub.add_parser("dump-system", help="write the assembled matrix in "
                                            "coordinate text format: i j re im")
    ds.add_argument("--mesh", default="regular", choices=["regular", "chevron", "perturbed"])
    ds.add_argument("--n", type=int, required=True)
    ds.add_argument("--k", type=float, required=True)
    ds.add_argument("--mu", type=float, default=0.0)
    ds.add_argument("--rho0", type=float, default=5.0)
    ds.add_argument("--seed", type=int, default=0)
    ds.add_argument("--delta", type=float, default=0.0)
    ds.add_argument("--exponent", type=float, default=0.0)
    ds.add_argument("--out", required=True)

    ma = sub.add_parser("mesh-audit", help="measure the mesh condition over a family")
    ma.add_argument("--mesh", default="regular", choices=["regular", "chevron", "perturbed"])
    ma.add_argument("--n", type=_ints, required=True)
    ma.add_argument("--seed", type=int, default=0)
    ma.add_argument("--delta", type=float, default=0.0)
    ma.add_argument("--exponent", type=float, default=0.0)

    rt = sub.add_parser("rates", help="recompute rate columns of an existing CSV")
    rt.add_argument("--csv", required=True)
    rt.add_argument("--out", default=None, help="output path (default: in place)")
    return ap


def cmd_study(args) -> int:
    fields = dict(ks=args.k, mus=args.mu, Ns=args.n, rho0=args.rho0,
                  mesh_kind=args.mesh, mesh_seed=args.seed, mesh_delta=args.delta,
                  mesh_exponent=args.exponent, lambda_policy=args.lambda_policy,
                  estimator=args.estimator, tol=args.tol, out=args.out,
                  norm_literal=args.norm_literal, allow_large=args.allow_large)
    try:
        if args.config:
            cfg = StudyConfig.from_json(args.config, **fields)
        else:
            missing = [k for k in ("ks", "mus", "Ns") if fields[k] is None]
            if missing:
                print(f"error: missing required options for {missing} "
                      f"(--k / --mu / --n)", file=sys.stderr)
                return 2
            cfg = StudyConfig(**{k: v for k, v in fields.items() if v is not None})
        records = run_study(cfg)
    except StudyConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(summary_table(records))
    failed = [r for r in records if r.status != "ok"]
    if failed:
        print(f"{len(failed)} of {len(records)} cells failed", file=sys.stderr)
        return 1
    return 0


def cmd_dump_mesh(args) -> int:
    mesh = build_mesh(args.mesh, args.n, seed=args.seed, delta=args.delta,
                      perturbation_exponent=args.exponent)
    write_mesh_text(mesh, args.out)
    print(f"wrote {mesh.num_vertices} vertices, {mesh.num_triangles} triangles to {args.out}")
    return 0


def cmd_dump_system(args) -> int:
    mesh = build_mesh(args.mesh, args.n, seed=args.seed, delta=args.delta,
                      perturbation_exponent=args.exponent)
    system = assemble_system(mesh, args.k, args.mu, args.rho0)
    A = system.A.tocoo()
    order = np.lexsort((A.col, A.row))
    with open(args.out, "w") as f:
        for i, j, v in zip(A.row[order], A.col[order], A.data[order]):
            f.write(f"{i} {j} {v.real!r} {v.imag!r}\n")
    print(f"wrote {A.nnz} entries of a {A.shape[0]}x{A.shape[1]} system to {args.out}")
    return 0


def cmd_mesh_audit(args) -> int:
    meshes = [build_mesh(args.mesh, n, seed=args.seed, delta=args.delta,
                         perturbation_exponent=args.exponent) for n in args.n]
    print("N,h,max_interior_defect,max_defect,max_beta_mismatch,min_angle_deg")
    for n, m in zip(args.n, meshes):
        r = measure_mesh_condition(m)
        print(f"{n},{m.h:.5e},{r.max_interior_defect:.5e},{r.max_defect:.5e},"
              f"{r.beta_mismatch.max() if len(r.beta_mismatch) else 0.0:.5e},"
              f"{m.min_angle():.3f}")
    if len(meshes) >= 3:
        alpha = estimate_alpha(meshes)
        print(f"alpha estimate: {alpha if isinstance(alpha, str) else f'{alpha:.3f}'}")
    else:
        print("alpha estimate: n/a (need >= 3 meshes)")
    return 0


def cmd_rates(args) -> int:
    records = read_csv(args.csv)
    compute_rates(records)
    write_csv(records, args.out or args.csv)
    print(f"rates written to {args.out or args.csv}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"study": cmd_study, "dump-mesh": cmd_dump_mesh,
                "dump-system": cmd_dump_system, "mesh-audit": cmd_mesh_audit,
                "rates": cmd_rates}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
