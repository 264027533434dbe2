"""Convergence-study driver: sweeps over (k, mu, N), rates, CSV output.

One CSV row per sweep cell, written atomically; failed cells keep their row
with the failure reason in the ``status`` column so the row-count invariant
|k| * |mu| * |N| always holds. Floats are printed in scientific notation with
6 significant digits (lowercase e); observed orders with three decimals.
"""

from __future__ import annotations

import json
import logging
import math
import os
import tempfile
import time
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from .dg import interpolate_p1, solve_helmholtz
from .errors import ErrorRecord, compute_errors
from .exact import WaveParams, exact_f, exact_g, exact_grad_u, exact_u
from .mesh import TriMesh, build_mesh
from .quadrature import QuadratureSettings
from .recovery import error_estimator, recover_gradient, richardson_extrapolate

logger = logging.getLogger("helmdg")

CSV_HEADER = ("mesh,k,mu,rho0,lambda_policy,estimator,N,h,ndof,"
              "E1,rate_E1,E2,rate_E2,E3,rate_E3,eta,rate_eta,"
              "err_uhuI_1h,rate_uhuI,knorm_L2,J0_jump,status")

LARGE_N_LIMIT = 256


class StudyConfigError(ValueError):
    pass


@dataclass
class StudyConfig:
    ks: list[float]
    mus: list[float]
    Ns: list[int]
    rho0: float = 5.0
    mesh_kind: str = "regular"
    mesh_seed: int = 0
    mesh_delta: float = 0.0
    mesh_exponent: float = 0.0
    lambda_policy: str = "first"
    estimator: str = "richardson"
    tol: float = 1e-10
    quadrature: QuadratureSettings = field(default_factory=QuadratureSettings)
    out: str = "results.csv"
    deterministic: bool = True
    norm_literal: bool = False
    allow_large: bool = False

    def validate(self) -> None:
        if not self.ks:
            raise StudyConfigError("k list is empty")
        if not self.mus:
            raise StudyConfigError("mu list is empty")
        if not self.Ns:
            raise StudyConfigError("N list is empty")
        if any(n < 1 for n in self.Ns):
            raise StudyConfigError(f"N values must be positive: {self.Ns}")
        if any(b <= a for a, b in zip(self.Ns, self.Ns[1:])):
            raise StudyConfigError(f"N list must be strictly increasing: {self.Ns}")
        if any(k <= 0 for k in self.ks):
            raise StudyConfigError(f"wave numbers must be positive: {self.ks}")
        if any(m < 0 for m in self.mus):
            raise StudyConfigError(f"penalty exponents must be nonnegative: {self.mus}")
        if self.rho0 <= 0:
            raise StudyConfigError(f"rho0 must be positive: {self.rho0}")
        if self.estimator not in ("richardson", "ppr"):
            raise StudyConfigError(f"unknown estimator {self.estimator!r}")
        if self.lambda_policy not in ("first", "average"):
            raise StudyConfigError(f"unknown lambda policy {self.lambda_policy!r}")
        if max(self.Ns) > LARGE_N_LIMIT and not self.allow_large:
            raise StudyConfigError(
                f"N={max(self.Ns)} exceeds the default cap {LARGE_N_LIMIT} "
                f"(~{6 * LARGE_N_LIMIT ** 2} dofs); pass allow_large/--allow-large "
                f"to run it anyway (direct factorization may need several GB)")
        if max(self.Ns) > LARGE_N_LIMIT:
            logger.warning("running with N=%d: the sparse factorization may need "
                           "several GB of memory", max(self.Ns))

    @classmethod
    def from_json(cls, path: str, **overrides) -> "StudyConfig":
        with open(path) as f:
            data = json.load(f)
        data.update({k: v for k, v in overrides.items() if v is not None})
        quad = data.pop("quadrature", None)
        cfg = cls(**data)
        if quad:
            cfg.quadrature = QuadratureSettings(**quad)
        return cfg


@dataclass
class StudyRecord:
    mesh_kind: str
    k: float
    mu: float
    rho0: float
    lambda_policy: str
    estimator: str
    N: int
    h: float | None = None
    ndof: int | None = None
    errors: ErrorRecord | None = None
    rate_E1: float | None = None
    rate_E2: float | None = None
    rate_E3: float | None = None
    rate_eta: float | None = None
    rate_uhuI: float | None = None
    wall_time_s: float | None = None
    status: str = "ok"

    def csv_row(self) -> str:
        e = self.errors
        cells = [
            self.mesh_kind, _fmt_g(self.k), _fmt_g(self.mu), _fmt_g(self.rho0),
            self.lambda_policy, self.estimator, str(self.N),
            _fmt_e(self.h), "" if self.ndof is None else str(self.ndof),
            _fmt_e(e.E1 if e else None), _fmt_rate(self.rate_E1),
            _fmt_e(e.E2 if e else None), _fmt_rate(self.rate_E2),
            _fmt_e(e.E3 if e else None), _fmt_rate(self.rate_E3),
            _fmt_e(e.eta if e else None), _fmt_rate(self.rate_eta),
            _fmt_e(e.err_uhuI_1h if e else None), _fmt_rate(self.rate_uhuI),
            _fmt_e(e.knorm_l2 if e else None),
            _fmt_e(e.j0_jump if e else None),
            self.status,
        ]
        return ",".join(cells)


def _fmt_e(x) -> str:
    return "" if x is None else f"{x:.5e}"


def _fmt_g(x) -> str:
    return f"{x:g}"


def _fmt_rate(x) -> str:
    return "" if x is None else f"{x:.3f}"


def _rate(prev: float | None, curr: float | None) -> float | None:
    if prev is None or curr is None or prev <= 0 or curr <= 0:
        return None
    return math.log2(prev / curr)


def compute_rates(records: list[StudyRecord]) -> list[StudyRecord]:
    """Fill the observed-order columns from consecutive doubling pairs.

    Records must share (mesh, k, mu) and be ascending in N with ratio 2;
    groups are rated independently.
    """
    groups: dict[tuple, list[StudyRecord]] = {}
    for r in records:
        groups.setdefault((r.mesh_kind, r.k, r.mu), []).append(r)
    for key, grp in groups.items():
        ns = [r.N for r in grp]
        if any(b != 2 * a for a, b in zip(ns, ns[1:])):
            raise ValueError(f"group {key} has a non-doubling N sequence: {ns}")
        for prev, curr in zip(grp, grp[1:]):
            pe, ce = prev.errors, curr.errors
            if pe is None or ce is None:
                continue
            curr.rate_E1 = _rate(pe.E1, ce.E1)
            curr.rate_E2 = _rate(pe.E2, ce.E2)
            curr.rate_E3 = _rate(pe.E3, ce.E3)
            curr.rate_eta = _rate(pe.eta, ce.eta)
            curr.rate_uhuI = _rate(pe.err_uhuI_1h, ce.err_uhuI_1h)
    return records


def run_study(config: StudyConfig, progress: bool = True) -> list[StudyRecord]:
    """Run the sweep, write the CSV atomically, and return all records."""
    config.validate()
    mesh_cache: dict[int, TriMesh] = {}

    def get_mesh(N: int) -> TriMesh:
        if N not in mesh_cache:
            mesh_cache[N] = build_mesh(config.mesh_kind, N, seed=config.mesh_seed,
                                       delta=config.mesh_delta,
                                       perturbation_exponent=config.mesh_exponent)
        return mesh_cache[N]

    records: list[StudyRecord] = []
    any_failed = False
    for k in config.ks:
        params = WaveParams(k)
        u_fn = lambda p: exact_u(p, params)
        grad_fn = lambda p: exact_grad_u(p, params)
        f_fn = lambda p: exact_f(p, params)
        g_fn = lambda p, n: exact_g(p, n, params)
        for mu in config.mus:
            prev: tuple[int, object] | None = None      # (N, RecoveredGradient)
            for N in config.Ns:
                rec = StudyRecord(config.mesh_kind, k, mu, config.rho0,
                                  config.lambda_policy, config.estimator, N)
                t0 = time.perf_counter()
                try:
                    mesh = get_mesh(N)
                    rec.h = mesh.h
                    rec.ndof = 3 * mesh.num_triangles
                    u_h, _ = solve_helmholtz(mesh, k, f_fn, g_fn, mu, config.rho0,
                                             config.quadrature, config.tol)
                    G = recover_gradient(u_h, config.lambda_policy)
                    RG = None
                    if prev is not None and N == 2 * prev[0]:
                        RG = richardson_extrapolate(prev[1], G)
                    if config.estimator == "richardson":
                        eta = error_estimator(u_h, RG) if RG is not None else None
                    else:
                        eta = error_estimator(u_h, G)
                    u_I = interpolate_p1(u_fn, mesh)
                    rec.errors = compute_errors(
                        u_h, u_fn, grad_fn, k, mu, config.rho0,
                        gradient=G, richardson=RG, eta=eta, u_I=u_I,
                        settings=config.quadrature, norm_literal=config.norm_literal)
                    prev = (N, G)
                except Exception as exc:
                    logger.exception("cell (k=%g, mu=%g, N=%d) failed", k, mu, N)
                    rec.status = f"error: {type(exc).__name__}: {exc}"
                    any_failed = True
                    prev = None
                rec.wall_time_s = time.perf_counter() - t0
                records.append(rec)
                if progress:
                    e1 = rec.errors.E1 if rec.errors else float("nan")
                    logger.info("k=%g mu=%g N=%d: E1=%.5e (%.1fs) %s",
                                k, mu, N, e1, rec.wall_time_s,
                                "" if rec.status == "ok" else rec.status)

    compute_rates(records)
    if config.out:
        write_csv(records, config.out)
    config._any_failed = any_failed          # inspected by the CLI for the exit code
    return records


def write_csv(records: list[StudyRecord], path: str) -> None:
    """Atomic write: temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".helmdg-", suffix=".csv")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(CSV_HEADER + "\n")
            for r in records:
                f.write(r.csv_row() + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def summary_table(records: list[StudyRecord]) -> str:
    """Plain-text table that reprints exactly the CSV values."""
    header = CSV_HEADER.split(",")
    rows = [r.csv_row().split(",") for r in records]
    widths = [max(len(header[i]), *(len(row[i]) for row in rows)) if rows else len(header[i])
              for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines)


def read_csv(path: str) -> list[StudyRecord]:
    """Parse a study CSV back into records (inverse of write_csv for rating)."""
    with open(path) as f:
        header = f.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header in {path}")
        records = []
        for line in f:
            cells = line.rstrip("\n").split(",")
            if len(cells) != len(CSV_HEADER.split(",")):
                raise ValueError(f"malformed CSV row: {line!r}")
            (mesh_kind, k, mu, rho0, pol, est, N, h, ndof, E1, rE1, E2, rE2, E3, rE3,
             eta, reta, uhuI, ruhuI, knorm, j0, status) = cells
            fl = lambda s: None if s == "" else float(s)
            err = None
            if E1 != "":
                err = ErrorRecord(E1=float(E1), E2=fl(E2), E3=fl(E3), eta=fl(eta),
                                  err_uhuI_1h=float(uhuI), err_uhuI_triple=float("nan"),
                                  knorm_l2=float(knorm), j0_jump=float(j0))
            records.append(StudyRecord(
                mesh_kind, float(k), float(mu), float(rho0), pol, est, int(N),
                h=fl(h), ndof=None if ndof == "" else int(ndof), errors=err,
                rate_E1=fl(rE1), rate_E2=fl(rE2), rate_E3=fl(rE3), rate_eta=fl(reta),
                rate_uhuI=fl(ruhuI), status=status))
    return records
