"""Command line front end.

    sympow value 0,-1,1,0,0 --m 3
    sympow bk 11a3 --m 6
    sympow conductor 0,-1,1,0,0 --m 3
    sympow euler 0,-1,1,0,0 --m 2 --p 3
    sympow scan --db curves.txt --m 3,5 --out scan.jsonl

Every flag can also be set through the environment as SYMPOW_<FLAG>
(for example SYMPOW_PRECISION=128 or SYMPOW_MESH_DIR=/tmp/meshes).
Command-line values win over the environment, which wins over defaults.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

from mpmath import mp, mpf

from . import engine as eng
from .curves import CMCurveError, CurveError, EllipticCurve, factor, load_database, parse_curve
from .lseries import global_conductor, global_ldata
from .local import euler_factor
from .mellin import MeshFormatError, MeshStore, mesh_verify, read_mesh
from .numerics import MAX_PRECISION, MIN_PRECISION, format_factorization, set_precision

EXIT_OK = 0
EXIT_FAILED = 1  # some record did not come out ok
EXIT_USAGE = 2

CM_MESSAGE = "CM curves are not supported (their symmetric powers split into Hecke L-functions)"


@dataclass
class RunConfig:
    precision: int = 212
    terms: int = 10**8
    tol: float = 1e-6
    zero_tol: float = 1e-9
    sign: str = "auto"
    mesh_dir: str = "./meshes"
    format: str = "text"
    threads: int = 0  # 0 means every core
    db: str | None = None
    timings: bool = False

    def __post_init__(self):
        if not MIN_PRECISION <= self.precision <= MAX_PRECISION:
            raise ValueError(f"precision must lie in [{MIN_PRECISION}, {MAX_PRECISION}]")
        if self.sign not in ("auto", "+1", "-1"):
            raise ValueError("sign must be auto, +1 or -1")
        if self.format not in ("text", "json", "csv"):
            raise ValueError("format must be text, json or csv")

    @property
    def workers(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)

    @property
    def sign_policy(self):
        return self.sign if self.sign == "auto" else int(self.sign)

    @classmethod
    def resolve(cls, args: argparse.Namespace, environ=None) -> "RunConfig":
        environ = os.environ if environ is None else environ
        kw = {}
        for f in fields(cls):
            val = getattr(args, f.name, None)
            if val is None:
                raw = environ.get("SYMPOW_" + f.name.upper())
                if raw is not None:
                    val = _from_env(f.name, raw)
            if val is not None:
                kw[f.name] = val
        return cls(**kw)


def _from_env(name: str, raw: str):
    if name in ("precision", "threads"):
        return int(raw)
    if name == "terms":
        return int(float(raw))
    if name in ("tol", "zero_tol"):
        return float(raw)
    if name == "timings":
        return raw.lower() in ("1", "true", "yes", "on")
    return raw


# ------------------------------------------------------------------ records

CSV_COLUMNS = ["label", "ainvs", "m", "conductor", "sign", "fe_discrepancy", "order", "bk", "value", "runtime", "status"]


@dataclass
class ScanRecord:
    """One (curve, m) result.  ``runtime`` stays None unless timings are on,
    so that identical runs give identical bytes."""

    label: str
    ainvs: list[int]
    m: int
    conductor: int | None = None
    sign: int | None = None
    fe_discrepancy: float | None = None
    order: int | None = None
    bk: str | None = None
    value: str | None = None
    runtime: float | None = None
    status: str = "ok"

    @property
    def key(self) -> tuple[str, int]:
        return (self.label, self.m)

    @property
    def good(self) -> bool:
        return self.status == "ok" or self.status.startswith("skipped")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ScanRecord":
        return cls(**json.loads(text))

    def to_csv_row(self) -> list[str]:
        out = []
        for name in CSV_COLUMNS:
            v = getattr(self, name)
            if v is None:
                out.append("")
            elif name == "ainvs":
                out.append(" ".join(str(a) for a in v))
            else:
                out.append(str(v))
        return out

    @classmethod
    def from_csv_row(cls, row: list[str]) -> "ScanRecord":
        d = dict(zip(CSV_COLUMNS, row))
        ints = ("m", "conductor", "sign", "order")
        kw = {}
        for name, v in d.items():
            if name == "ainvs":
                kw[name] = [int(a) for a in v.split()]
            elif v == "":
                kw[name] = None if name != "status" else ""
            elif name in ints:
                kw[name] = int(v)
            elif name in ("fe_discrepancy", "runtime"):
                kw[name] = float(v)
            else:
                kw[name] = v
        return cls(**kw)

    def text(self) -> str:
        parts = [f"{self.label} m={self.m}"]
        for name in ("conductor", "sign", "fe_discrepancy", "order", "bk", "value"):
            v = getattr(self, name)
            if v is not None:
                parts.append(f"{name}={v:.3e}" if name == "fe_discrepancy" else f"{name}={v}")
        if self.runtime is not None:
            parts.append(f"runtime={self.runtime:.2f}s")
        parts.append(f"status={self.status}")
        return " ".join(parts)


def _csv_line(row: list[str]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow(row)
    return buf.getvalue()


def _nstr(x, digits: int) -> str:
    with mp.workprec(int(digits * 3.33) + 16):
        return mp.nstr(mpf(x), digits, min_fixed=-4, max_fixed=6)


# ------------------------------------------------------------------ helpers


_ENGINE: eng.Engine | None = None


def _engine(cfg: RunConfig) -> eng.Engine:
    global _ENGINE
    stale = _ENGINE is None or (_ENGINE.precision, _ENGINE.term_cap, _ENGINE.mesh_dir) != (cfg.precision, cfg.terms, cfg.mesh_dir)
    if stale:
        set_precision(cfg.precision)
        _ENGINE = eng.Engine(cfg.precision, cfg.terms, cfg.mesh_dir)
    return _ENGINE


def _curve(text: str, cfg: RunConfig) -> EllipticCurve:
    return parse_curve(text, cfg.db)


def _label(curve: EllipticCurve) -> str:
    return curve.label or ",".join(str(a) for a in curve.ainvs)


def _digits(bits: int) -> int:
    return max(6, int(bits * 0.30103) - 2)


def _fe_record(curve: EllipticCurve, m: int, cfg: RunConfig, rec: ScanRecord, d: int = 0) -> None:
    rep = eng.check_fe(curve, m, d, cfg.tol, _engine(cfg), cfg.sign_policy)
    rec.sign = rep.sign
    rec.fe_discrepancy = float(rep.discrepancy)
    if not rep.passed:
        rec.status = "fail: functional equation"
    elif rep.degraded:
        rec.status = "fail: term cap reached"


# ----------------------------------------------------------------- commands


def cmd_value(curve, args, cfg) -> ScanRecord:
    tol = args.tol  # only an explicit --tol lowers the accuracy target
    req = eng.EvalRequest(curve, args.m, args.d, Fraction(args.A), cfg.sign_policy, tol, cfg.terms)
    res = eng.lambda_value(req, _engine(cfg))
    rec = ScanRecord(_label(curve), list(curve.ainvs), args.m, global_conductor(curve, args.m), res.sign)
    rec.fe_discrepancy = float(res.discrepancy)
    rec.value = _nstr(res.normalized, _digits(res.bits))
    accuracy = mpf(2) ** (-res.bits + 8) * max(1, abs(res.normalized))
    if res.degraded:
        rec.status = "fail: term cap reached"
    elif res.discrepancy > accuracy and res.discrepancy > cfg.tol:
        rec.status = "fail: functional equation"
    return rec


def cmd_order(curve, args, cfg) -> ScanRecord:
    rep = eng.order_of_vanishing(curve, args.m, cfg.zero_tol, _engine(cfg), cfg.sign_policy)
    rec = ScanRecord(_label(curve), list(curve.ainvs), args.m, global_conductor(curve, args.m), rep.sign)
    rec.order = rep.order
    rec.value = _nstr(rep.value, 12)
    return rec


def cmd_bk(curve, args, cfg) -> ScanRecord:
    res = eng.bloch_kato(curve, args.m, _engine(cfg), zero_tol=cfg.zero_tol)
    rec = ScanRecord(_label(curve), list(curve.ainvs), args.m, global_conductor(curve, args.m), res.sign)
    rec.value = _nstr(res.bk_raw, 20) if res.bk_raw is not None else None
    if res.bk_rational is None:
        rec.status = "fail: " + "; ".join(res.notes)
    else:
        r = res.bk_rational
        rec.bk = f"{r} = {res.bk_factorization}" if r not in (0, 1) and str(r) != res.bk_factorization else str(r)
    return rec


def cmd_checkfe(curve, args, cfg) -> ScanRecord:
    rec = ScanRecord(_label(curve), list(curve.ainvs), args.m, global_conductor(curve, args.m))
    _fe_record(curve, args.m, cfg, rec, args.d)
    return rec


def cmd_conductor(curve, args, cfg) -> ScanRecord:
    N = global_conductor(curve, args.m)
    rec = ScanRecord(_label(curve), list(curve.ainvs), args.m, N)
    fac = "*".join(f"{p}^{e}" if e > 1 else str(p) for p, e in sorted(factor(N).items()))
    rec.value = str(N) if fac in ("", str(N)) else f"{N} = {fac}"
    return rec


def cmd_euler(curve, args, cfg) -> ScanRecord:
    if args.p is None:
        raise CurveError("euler needs --p")
    rec = ScanRecord(_label(curve), list(curve.ainvs), args.m)
    rec.value = str(euler_factor(curve, args.p, args.m))
    return rec


COMMANDS = {
    "value": cmd_value,
    "order": cmd_order,
    "bk": cmd_bk,
    "checkfe": cmd_checkfe,
    "conductor": cmd_conductor,
    "euler": cmd_euler,
}


def _text_line(cmd: str, rec: ScanRecord) -> str:
    if cmd in ("conductor", "euler"):
        return rec.value
    if cmd == "bk" and rec.bk is not None:
        return rec.bk
    if cmd == "order" and rec.status == "ok":
        return f"{rec.order}"
    return rec.text()


def _emit(records: list[ScanRecord], fmt: str, out, cmd: str | None = None) -> None:
    if fmt == "json":
        for r in records:
            out.write(r.to_json() + "\n")
    elif fmt == "csv":
        out.write(_csv_line(CSV_COLUMNS))
        for r in records:
            out.write(_csv_line(r.to_csv_row()))
    else:
        for r in records:
            out.write((_text_line(cmd, r) if cmd else r.text()) + "\n")


def run_single(cmd: str, args, cfg: RunConfig) -> int:
    try:
        curve = _curve(args.curve, cfg)
    except CMCurveError:
        print(f"error: {CM_MESSAGE}", file=sys.stderr)
        return EXIT_USAGE
    except CurveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    t0 = time.perf_counter()
    try:
        rec = COMMANDS[cmd](curve, args, cfg)
    except (CurveError, ValueError, ArithmeticError) as exc:
        rec = ScanRecord(_label(curve), list(curve.ainvs), getattr(args, "m", 0), status=f"error: {exc}")
    if cfg.timings:
        rec.runtime = round(time.perf_counter() - t0, 3)
    _emit([rec], cfg.format, sys.stdout, cmd)
    if cfg.timings and _ENGINE is not None:
        print("timings: " + " ".join(f"{k}={v:.2f}s" for k, v in sorted(_ENGINE.timings.items())), file=sys.stderr)
    return EXIT_OK if rec.good else EXIT_FAILED


# --------------------------------------------------------------------- scan


@dataclass
class ScanOptions:
    ms: list[int]
    bk: bool = False
    order: bool = True
    max_conductor: int | None = None


def scan_one(label: str, ainvs, m: int, cfg: RunConfig, opts: ScanOptions) -> ScanRecord:
    """Everything the scan reports for one curve and one m; never raises."""
    rec = ScanRecord(label, list(ainvs), m)
    t0 = time.perf_counter()
    try:
        curve = EllipticCurve.from_ainvs(ainvs, label=label)
        rec.conductor = global_conductor(curve, m)
        _fe_record(curve, m, cfg, rec)
        if rec.status == "ok" and opts.order and m % 2 == 1:
            rep = eng.order_of_vanishing(curve, m, cfg.zero_tol, _engine(cfg), cfg.sign_policy)
            rec.order = rep.order
        if rec.status == "ok" and opts.bk and m >= 2 and (m % 2 == 1 or (m // 2) % 2 == 1):
            res = eng.bloch_kato(curve, m, _engine(cfg), zero_tol=cfg.zero_tol)
            rec.bk = res.bk_factorization
    except CMCurveError:
        rec.status = "skipped: CM"
    except (CurveError, ValueError, ArithmeticError) as exc:
        rec.status = f"error: {exc}"
    if cfg.timings:
        rec.runtime = round(time.perf_counter() - t0, 3)
    return rec


def _scan_task(item):
    label, ainvs, m, cfg, opts = item
    return scan_one(label, ainvs, m, cfg, opts)


def _read_existing(path: Path, fmt: str) -> list[ScanRecord]:
    """Complete records already in ``path``; a torn last line is dropped."""
    if not path.exists():
        return []
    out = []
    text = path.read_text()
    lines = [ln for ln in text.splitlines(keepends=True) if ln.endswith("\n")]
    for ln in lines:
        if not ln.strip() or ln.startswith("#"):
            continue
        try:
            if fmt == "csv":
                row = next(csv.reader([ln]))
                if row == CSV_COLUMNS:
                    continue
                out.append(ScanRecord.from_csv_row(row))
            else:
                out.append(ScanRecord.from_json(ln))
        except (ValueError, TypeError, StopIteration):
            continue
    return out


def histogram(records: list[ScanRecord]) -> str:
    """Counts of vanishing orders per m, as a block of '#' lines."""
    lines = ["# order of vanishing at the centre"]
    for m in sorted({r.m for r in records}):
        rs = [r for r in records if r.m == m and r.status == "ok"]
        counts = Counter(r.order for r in rs if r.order is not None)
        skipped = sum(1 for r in records if r.m == m and r.status.startswith("skipped"))
        failed = sum(1 for r in records if r.m == m and not r.good)
        row = " ".join(f"{k}:{counts[k]}" for k in sorted(counts))
        lines.append(f"# m={m} {row or '-'} (ok {len(rs)}, skipped {skipped}, failed {failed})")
    return "\n".join(lines) + "\n"


def prebuild_meshes(records, ms: list[int], cfg: RunConfig) -> int:
    """Build the functional-equation meshes for the smallest and largest
    conductor at each m before the curve loop starts."""
    engine = _engine(cfg)
    before = engine.meshes.builds
    bits = eng._bits_for_tol(cfg.tol)
    for m in ms:
        curves = []
        for r in records:
            try:
                E = EllipticCurve.from_ainvs(r.ainvs, label=r.label)
                curves.append((global_conductor(E, m), E))
            except CurveError:
                continue
        if not curves:
            continue
        curves.sort(key=lambda t: t[0])
        for _, E in (curves[0], curves[-1]):
            g = global_ldata(E, m)
            plan = engine.plan(g, [0], [Fraction(1), eng.A_TEST], bits)
            if plan.n_hi <= cfg.terms:
                engine.prepare_meshes(g, plan)
    return engine.meshes.builds - before


def run_scan(args, cfg: RunConfig) -> int:
    db = args.db_file or cfg.db
    try:
        records = load_database(db)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    opts = ScanOptions(_parse_ms(args.m), bk=args.bk, order=not args.no_order, max_conductor=args.max_conductor)
    if opts.max_conductor is not None:
        records = [r for r in records if r.conductor <= opts.max_conductor]
    if args.limit is not None:
        records = records[: args.limit]
    fmt = "csv" if cfg.format == "csv" else "json"
    out_path = Path(args.out) if args.out else None
    done: list[ScanRecord] = []
    if out_path is not None:
        done = _read_existing(out_path, fmt)
        with open(out_path, "w") as fh:  # rewrite without footer or torn lines
            if fmt == "csv":
                fh.write(_csv_line(CSV_COLUMNS))
            for r in done:
                fh.write(_csv_line(r.to_csv_row()) if fmt == "csv" else r.to_json() + "\n")
    have = {r.key for r in done}
    todo = [(r.label, r.ainvs, m, cfg, opts) for r in records for m in opts.ms if (r.label, m) not in have]
    prebuild_meshes(records, opts.ms, cfg)
    sink = open(out_path, "a") if out_path is not None else sys.stdout
    new: list[ScanRecord] = []
    try:
        if out_path is None and fmt == "csv":
            sink.write(_csv_line(CSV_COLUMNS))
        if cfg.workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(cfg.workers) as pool:
                results = pool.map(_scan_task, todo)
                for rec in results:
                    _write_record(sink, rec, fmt)
                    new.append(rec)
        else:
            for item in todo:
                rec = _scan_task(item)
                _write_record(sink, rec, fmt)
                new.append(rec)
        allrecs = done + new
        foot = histogram(allrecs)
        if fmt == "csv" and out_path is not None:
            sink.write(foot)
    finally:
        if sink is not sys.stdout:
            sink.close()
    sys.stdout.write(foot)
    return EXIT_OK if all(r.good for r in allrecs) else EXIT_FAILED


def _write_record(sink, rec: ScanRecord, fmt: str) -> None:
    sink.write(_csv_line(rec.to_csv_row()) if fmt == "csv" else rec.to_json() + "\n")
    sink.flush()


def _parse_ms(text) -> list[int]:
    if isinstance(text, int):
        return [text]
    ms = []
    for part in str(text).split(","):
        if "-" in part:
            a, b = part.split("-")
            ms.extend(range(int(a), int(b) + 1))
        else:
            ms.append(int(part))
    return ms


# --------------------------------------------------------------------- mesh


def run_mesh(args, cfg: RunConfig) -> int:
    if args.mesh_cmd == "verify":
        directory = Path(cfg.mesh_dir)
        paths = sorted(directory.glob("*.mesh"))
        worst_all = -float("inf")
        bad = 0
        for path in paths:
            try:
                mesh = read_mesh(path)
            except MeshFormatError as exc:
                print(f"{path.name}: unreadable ({exc})")
                bad += 1
                continue
            worst = mesh_verify(mesh, samples=args.samples)
            ok = worst < -(mesh.precision - 24)
            bad += not ok
            worst_all = max(worst_all, worst)
            print(f"{path.name}: worst log2 error {worst:.1f} {'ok' if ok else 'FAIL'}")
        print(f"{len(paths)} meshes, {bad} failed")
        return EXIT_OK if bad == 0 else EXIT_FAILED
    # build: the meshes needed to evaluate the given curves (or the database)
    engine = _engine(cfg)
    if args.curves:
        curves = [_curve(c, cfg) for c in args.curves]
    else:
        curves = [EllipticCurve.from_ainvs(r.ainvs, label=r.label) for r in load_database(cfg.db) if not _is_cm(r)]
    bits = eng._bits_for_tol(cfg.tol)
    ds = list(range(args.d + 1))
    before = engine.meshes.builds
    for m in _parse_ms(args.m):
        for E in curves:
            g = global_ldata(E, m)
            plan = engine.plan(g, ds, [Fraction(1), eng.A_TEST], bits)
            engine.prepare_meshes(g, plan)
    print(f"built {engine.meshes.builds - before} meshes in {cfg.mesh_dir}")
    return EXIT_OK


def _is_cm(rec) -> bool:
    try:
        EllipticCurve.from_ainvs(rec.ainvs)
    except CMCurveError:
        return True
    return False


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--precision", type=int, help="working precision in bits (64..256, default 212)")
    common.add_argument("--terms", type=lambda s: int(float(s)), help="cap on Dirichlet terms (default 1e8)")
    common.add_argument("--tol", type=float, help="functional-equation tolerance (default 1e-6)")
    common.add_argument("--zero-tol", dest="zero_tol", type=float, help="threshold for a vanishing value (default 1e-9)")
    common.add_argument("--sign", choices=["auto", "+1", "-1"], help="functional-equation sign policy")
    common.add_argument("--mesh-dir", dest="mesh_dir", help="mesh cache directory (default ./meshes)")
    common.add_argument("--format", choices=["text", "json", "csv"])
    common.add_argument("--db", help="curve database for labels (default: bundled)")
    common.add_argument("--threads", type=int, help="worker processes for scan (default: all cores)")
    common.add_argument("--timings", action="store_const", const=True, help="record runtimes")

    ap = argparse.ArgumentParser(
        prog="sympow", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    sub = ap.add_subparsers(dest="cmd", required=True)

    def curve_cmd(name, help_, m_required=True):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("curve", help="a1,a2,a3,a4,a6 or [a1,...] or a database label")
        p.add_argument("--m", type=int, required=m_required, help="symmetric power")
        return p

    p = curve_cmd("value", "Lambda^(d) at the central or edge point")
    p.add_argument("--d", type=int, default=0)
    p.add_argument("--A", type=Fraction, default=Fraction(1), help="auxiliary parameter A in [1/2, 2]")
    curve_cmd("order", "order of vanishing at the centre (odd m)")
    curve_cmd("bk", "Bloch-Kato quotient as a recognised rational")
    p = curve_cmd("checkfe", "compare the A = 1 and A = 9/8 evaluations")
    p.add_argument("--d", type=int, default=0)
    curve_cmd("conductor", "conductor of Sym^m")
    p = curve_cmd("euler", "local Euler polynomial at p")
    p.add_argument("--p", type=int, required=True)

    mesh = sub.add_parser("mesh", help="mesh cache management")
    msub = mesh.add_subparsers(dest="mesh_cmd", required=True)
    b = msub.add_parser("build", parents=[common], help="build meshes needed by curves")
    b.add_argument("curves", nargs="*")
    b.add_argument("--m", default="3", help="symmetric powers, e.g. 3 or 1,3,5 or 3-7")
    b.add_argument("--d", type=int, default=1, help="highest derivative order")
    v = msub.add_parser("verify", parents=[common], help="check every cached mesh")
    v.add_argument("--samples", type=int, default=8)

    s = sub.add_parser("scan", parents=[common], help="batch run over a database")
    s.add_argument("db_file", nargs="?", help="database file (default: --db or bundled)")
    s.add_argument("--m", default="3", help="symmetric powers, e.g. 3 or 1,3,5 or 3-7")
    s.add_argument("--out", help="output file; an existing one is resumed")
    s.add_argument("--bk", action="store_true", help="also compute Bloch-Kato quotients")
    s.add_argument("--no-order", action="store_true", help="skip the order of vanishing")
    s.add_argument("--max-conductor", type=int)
    s.add_argument("--limit", type=int, help="only the first LIMIT curves")
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.resolve(args)
    except ValueError as exc:
        parser.error(str(exc))
    set_precision(cfg.precision)
    if args.cmd == "scan":
        return run_scan(args, cfg)
    if args.cmd == "mesh":
        return run_mesh(args, cfg)
    return run_single(args.cmd, args, cfg)


if __name__ == "__main__":
    sys.exit(main())
