"""Batch command line: ``metaplectic <command> ...``.

Every command writes ``manifest.json`` into ``--out-dir`` and exits with 0
only if all of its checks pass (1 on a failed check, 2 on an error).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import fft as sfft

from . import __version__
from .errors import MetaplecticError, SpecMismatch
from .fio import FioOperator, fio_compose, gabor_class_check, symbol_chain
from .grid import (GridSignal, GridSpec, gaussian, hermite, load_signal, norm2,
                   phase_invariant_distance, save_signal, zeros)
from .ops import ROUTES, make_plan
from .quantize import PhaseSymbol
from .schrodinger import (PropagatorConfig, caustic_apply, is_caustic, split_step_evolve,
                          unperturbed_evolve)
from .symplectic import (BlockSymplectic, constants, from_matrix, identity, j_matrix,
                         random_symplectic, random_symplectic_rank, verify_subspace_mappings)
from .tf import intertwining_error


@dataclass
class Check:
    name: str
    passed: bool
    value: float | None = None
    tol: float | None = None
    note: str = ""


@dataclass
class RunManifest:
    command: str
    inputs: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    wall_time: float = 0.0
    error: str | None = None
    version: str = __version__

    @property
    def ok(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks)

    def check(self, name: str, value: float, tol: float, note: str = "") -> Check:
        c = Check(name, bool(value <= tol), float(value), float(tol), note)
        self.checks.append(c)
        return c

    def check_min(self, name: str, value: float, floor: float, note: str = "") -> Check:
        c = Check(name, bool(value >= floor), float(value), float(floor), note)
        self.checks.append(c)
        return c

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ok"] = self.ok
        return out

    def write(self, path: Path):
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def _digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _grid(text: str | None) -> GridSpec | None:
    if text is None:
        return None
    parts = text.split(",")
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError("--grid expects n,extent or n,extent,dim")
    n, ext = int(parts[0]), float(parts[1])
    d = int(parts[2]) if len(parts) == 3 else 1
    return GridSpec(d, n, ext)


# ---------------------------------------------------------------------------
# file helpers


def load_matrix(path) -> BlockSymplectic:
    obj = json.loads(Path(path).read_text())
    if "matrix" in obj:
        return from_matrix(np.asarray(obj["matrix"], dtype=float))
    return BlockSymplectic.from_dict(obj)


def _load_matrix_raw(path) -> np.ndarray:
    obj = json.loads(Path(path).read_text())
    if "matrix" in obj:
        return np.asarray(obj["matrix"], dtype=float)
    d = int(obj["dim"])
    A, B, C, D = (np.asarray(obj[k], dtype=float).reshape(d, d) for k in "ABCD")
    return np.block([[A, B], [C, D]])


def load_symbol(ref, spec: GridSpec, base: Path) -> PhaseSymbol:
    if ref in (None, "one"):
        return PhaseSymbol.const(spec, 1.0)
    if ref == "zero":
        return PhaseSymbol.const(spec, 0.0)
    p = Path(ref)
    return PhaseSymbol.load(p if p.is_absolute() else base / p)


def _resolve(path: str, out_dir: Path) -> Path:
    p = Path(path)
    return p if p.is_absolute() else out_dir / p


# ---------------------------------------------------------------------------
# commands


def cmd_verify(args, m: RunManifest):
    m.inputs[args.matrix] = _digest(args.matrix)
    raw = _load_matrix_raw(args.matrix)
    tol = args.tol if args.tol is not None else 1e-10
    S = from_matrix(raw, check=False)
    res = S.residuals()
    for k, v in res.items():
        m.check(f"residual_{k}", v, tol)
    if S.max_residual() <= tol:
        rep = verify_subspace_mappings(S)
        for k, v in rep.residuals.items():
            m.check(f"mapping_{k}", v, 1e-9)
        m.parameters["d_maps_kernel"] = rep.d_maps_kernel
        m.parameters["rank_A"] = S.rank_A
        if S.rank_A > 0:
            try:
                c, c1 = constants(S)
                m.parameters["constants"] = {"c": c, "c1": c1}
            except MetaplecticError as exc:
                m.parameters["constants"] = repr(exc)


def cmd_apply(args, m: RunManifest):
    m.inputs[args.matrix] = _digest(args.matrix)
    m.inputs[args.inp] = _digest(args.inp)
    S = load_matrix(args.matrix)
    f, _ = load_signal(args.inp)
    plan = make_plan(S, args.route, args.form)
    m.parameters.update(route=plan.route, form=args.form, steps=plan.to_dict().get("steps"))
    g = plan.apply(f)
    out = _resolve(args.out, args.out_dir)
    save_signal(out, g, args.encoding)
    m.outputs.append(str(out))
    tol = args.tol if args.tol is not None else 1e-3
    m.check("unitarity", abs(norm2(g) - norm2(f)) / max(norm2(f), 1e-300), tol)
    if args.wigner:
        plane = None if f.spec.dim == 1 else args.plane
        try:
            err = intertwining_error(f, g, S, plane)
            m.check("wigner_intertwining", err, 1e-2)
        except MetaplecticError as exc:
            m.checks.append(Check("wigner_intertwining", True, None, 1e-2, f"skipped: {exc}"))


def cmd_fio(args, m: RunManifest):
    op_path = Path(args.op)
    m.inputs[args.op] = _digest(op_path)
    m.inputs[args.inp] = _digest(args.inp)
    desc = json.loads(op_path.read_text())
    mpath = _resolve(desc["matrix"], op_path.parent)
    m.inputs[str(mpath)] = _digest(mpath)
    S = load_matrix(mpath)
    f, _ = load_signal(args.inp)
    sigma1 = load_symbol(desc.get("symbol", "one"), f.spec, op_path.parent)
    form = desc.get("form", "khee")
    s = float(desc.get("s", 0.0))
    m.parameters.update(form=form, s=s)
    comp = fio_compose(sigma1, S, s)
    if form == "composition":
        T = comp
    else:
        ch = symbol_chain(sigma1, S)
        T = FioOperator(S, ch.sigma, ch.form, s)
        m.parameters["form"] = ch.form
    g = T.apply(f)
    out = _resolve(args.out, args.out_dir)
    save_signal(out, g, args.encoding)
    m.outputs.append(str(out))
    tol = args.tol if args.tol is not None else 3e-3
    if T is not comp:
        ref = comp.apply(f)
        if norm2(ref) == 0.0:
            m.check("khee_vs_composition", norm2(g), tol)
        else:
            m.check("khee_vs_composition", phase_invariant_distance(g, ref), tol)
    if args.gabor:
        fit = gabor_class_check(T, radius=args.gabor_radius)
        m.parameters["decay_fit"] = fit.to_dict()
        m.check_min("decay_s_hat", fit.s_hat, args.s_target, "lower bound")


def _load_potential(path, spec: GridSpec) -> GridSignal | None:
    if path is None:
        return None
    V, _ = load_signal(path)
    if V.spec != spec:
        raise SpecMismatch("potential and initial datum on different grids")
    return V


def cmd_schrodinger_run(args, m: RunManifest):
    m.inputs[args.u0] = _digest(args.u0)
    u0, _ = load_signal(args.u0)
    V = None
    if args.V:
        m.inputs[args.V] = _digest(args.V)
        V = _load_potential(args.V, u0.spec)
    cfg = PropagatorConfig(args.t, args.steps, V, args.s)
    m.parameters.update(t=args.t, steps=args.steps, s=args.s)
    ev = split_step_evolve(u0, cfg, trace_every=args.trace_every if args.trace else 0)
    out = _resolve(args.out, args.out_dir)
    save_signal(out, ev.u, args.encoding)
    m.outputs.append(str(out))
    if args.trace:
        tp = _resolve(args.trace, args.out_dir)
        lines = ["step,time,norm,stft_sup"]
        lines += [f"{r.step},{r.time!r},{r.norm!r},{r.stft_sup!r}" for r in ev.trace]
        tp.write_text("\n".join(lines) + "\n")
        m.outputs.append(str(tp))
        sups = [r.stft_sup for r in ev.trace]
        m.check("stft_sup_ratio", max(sups) / max(min(sups), 1e-300), 10.0)
    tol = args.tol if args.tol is not None else 1e-3
    m.check("norm_conservation", abs(norm2(ev.u) - norm2(u0)) / max(norm2(u0), 1e-300), tol)
    if V is None:
        if is_caustic(args.t, 1e-9):
            k = int(round((args.t - math.pi / 2) / math.pi))
            m.check("caustic_cross_check", phase_invariant_distance(ev.u, caustic_apply(u0, k=k)), 3e-3)
        elif args.t == 0:
            m.check("identity", phase_invariant_distance(ev.u, u0), 1e-12)


def cmd_schrodinger_caustic(args, m: RunManifest):
    m.inputs[args.u0] = _digest(args.u0)
    u0, _ = load_signal(args.u0)
    b = load_symbol(args.b, u0.spec, Path("."))
    if args.b not in ("one", "zero"):
        m.inputs[args.b] = _digest(args.b)
    m.parameters.update(k=args.k, b=args.b)
    g = caustic_apply(u0, b, args.k)
    out = _resolve(args.out, args.out_dir)
    save_signal(out, g, args.encoding)
    m.outputs.append(str(out))
    if args.b == "one":
        ref = unperturbed_evolve(u0, math.pi / 2 + args.k * math.pi)
        tol = args.tol if args.tol is not None else 3e-3
        m.check("metaplectic_cross_check", phase_invariant_distance(g, ref), tol)


def cmd_generate(args, m: RunManifest):
    out = _resolve(args.out, args.out_dir)
    m.parameters.update(what=args.what, kind=args.kind, seed=args.seed)
    if args.what == "matrix":
        if args.kind == "random":
            S = random_symplectic(args.dim, 4, seed=args.seed)
        elif args.kind == "rank":
            S = random_symplectic_rank(args.dim, args.rank, seed=args.seed)
        elif args.kind == "identity":
            S = identity(args.dim)
        elif args.kind == "J":
            S = j_matrix(args.dim)
        elif args.kind == "a_t":
            from .schrodinger import propagator_matrix
            S = propagator_matrix(args.t)
        else:
            raise MetaplecticError(f"unknown matrix kind {args.kind!r}")
        out.write_text(json.dumps(S.to_dict(), sort_keys=True) + "\n")
    else:
        spec = args.grid or GridSpec(args.dim, 64, 8.0)
        if spec.dim != args.dim:
            spec = GridSpec(args.dim, spec.n, spec.extent[0])
        if args.kind == "gaussian":
            f = gaussian(spec, center=args.center, width=args.width)
        elif args.kind == "hermite":
            f = hermite(args.k, spec)
        elif args.kind == "zero":
            f = zeros(spec)
        elif args.kind == "noise":
            rng = np.random.default_rng(args.seed)
            f = GridSignal(spec, rng.standard_normal(spec.shape))
        elif args.kind == "constant":
            f = GridSignal(spec, np.full(spec.shape, args.value))
        else:
            raise MetaplecticError(f"unknown signal kind {args.kind!r}")
        save_signal(out, f, args.encoding)
    m.outputs.append(str(out))


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None, help="tolerance of the primary check")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--grid", type=_grid, default=None, help="n,extent[,dim]")
    common.add_argument("--out-dir", type=Path, default=Path("."))
    common.add_argument("--encoding", choices=("csv", "bin"), default="csv")

    p = argparse.ArgumentParser(prog="metaplectic", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common], help="validate a symplectic matrix")
    v.add_argument("--matrix", required=True)
    v.set_defaults(func=cmd_verify)

    a = sub.add_parser("apply", parents=[common], help="apply a metaplectic operator")
    a.add_argument("--matrix", required=True)
    a.add_argument("--route", default="auto", choices=("auto",) + ROUTES)
    a.add_argument("--form", default="general", choices=("general", "reduced"))
    a.add_argument("--in", dest="inp", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--wigner", action="store_true", help="report Wigner intertwining")
    a.add_argument("--plane", type=int, default=0)
    a.set_defaults(func=cmd_apply)

    fo = sub.add_parser("fio", help="generalized metaplectic operators")
    fsub = fo.add_subparsers(dest="fio_command", required=True)
    fa = fsub.add_parser("apply", parents=[common])
    fa.add_argument("--op", required=True, help="JSON {matrix, symbol, form, s}")
    fa.add_argument("--in", dest="inp", required=True)
    fa.add_argument("--out", required=True)
    fa.add_argument("--gabor", action="store_true", help="fit the Gabor-matrix decay")
    fa.add_argument("--gabor-radius", type=float, default=4.0)
    fa.add_argument("--s-target", type=float, default=4.0)
    fa.set_defaults(func=cmd_fio)

    sc = sub.add_parser("schrodinger", help="perturbed harmonic oscillator")
    ssub = sc.add_subparsers(dest="sch_command", required=True)
    r = ssub.add_parser("run", parents=[common])
    r.add_argument("--u0", required=True)
    r.add_argument("--V", default=None)
    r.add_argument("--t", type=float, required=True)
    r.add_argument("--steps", type=int, default=256)
    r.add_argument("--s", type=float, default=5.0)
    r.add_argument("--out", required=True)
    r.add_argument("--trace", default=None)
    r.add_argument("--trace-every", type=int, default=16)
    r.set_defaults(func=cmd_schrodinger_run)
    c = ssub.add_parser("caustic", parents=[common])
    c.add_argument("--u0", required=True)
    c.add_argument("--b", default="one", help='"one" or a symbol file')
    c.add_argument("--k", type=int, default=0)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_schrodinger_caustic)

    gsub = sub.add_parser("generate", parents=[common], help="write test matrices and signals")
    gsub.add_argument("what", choices=("matrix", "signal"))
    gsub.add_argument("--kind", required=True)
    gsub.add_argument("--dim", type=int, default=1)
    gsub.add_argument("--rank", type=int, default=0)
    gsub.add_argument("--t", type=float, default=0.0)
    gsub.add_argument("--k", type=int, default=0)
    gsub.add_argument("--center", type=float, nargs="*", default=None)
    gsub.add_argument("--width", type=float, default=1.0)
    gsub.add_argument("--value", type=float, default=1.0)
    gsub.add_argument("--out", required=True)
    gsub.set_defaults(func=cmd_generate)
    return p


def _command_name(args) -> str:
    name = args.command
    for attr in ("fio_command", "sch_command"):
        if getattr(args, attr, None):
            name += " " + getattr(args, attr)
    return name


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    params = {k: (str(v) if isinstance(v, (Path, GridSpec)) else v) for k, v in vars(args).items()
              if k not in ("func",)}
    m = RunManifest(_command_name(args), parameters=params)
    threads = int(os.environ.get("METAPLECTIC_THREADS", "1") or 1)
    t0 = time.perf_counter()
    try:
        with sfft.set_workers(max(1, threads)):
            args.func(args, m)
    except (MetaplecticError, OSError, ValueError, KeyError) as exc:
        m.error = f"{type(exc).__name__}: {exc}"
    m.wall_time = time.perf_counter() - t0
    m.write(args.out_dir / "manifest.json")
    for c in m.checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.name} value={c.value} tol={c.tol} {c.note}".rstrip())
    if m.error:
        print(f"ERROR {m.error}", file=sys.stderr)
        return 2
    return 0 if m.ok else 1


if __name__ == "__main__":
    sys.exit(main())
