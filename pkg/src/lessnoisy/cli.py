"""``lessnoisy`` command-line interface.

Channel files are JSON::

    {
      "input_size": 2,
      "input_labels": ["0", "1"],
      "receivers": [{"name": "Y1", "rows": [[0.9, 0.1], [0.1, 0.9]]}, ...],
      "auxiliaries": [{"name": "a", "top": [...], "chain": [[[...]], ...]}],
      "certificates": [{"name": "c", "virtuals": [[[...]], ...]}]
    }

Every command writes CSV (full float precision) to stdout or ``--out``,
preceded by a ``#`` comment line with a timestamp unless ``--no-header``.
``--table`` prints an aligned table with 6 decimals instead.
Exit status: 0 success, 1 verdict failure, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .channels import BroadcastChannel, ChannelMatrix, validate_channel
from .coding import SimConfig, run_trials
from .errors import LessNoisyError, ParseError
from .interleave import (
    BUILTIN_KINDS,
    CertificateStatus,
    InterleavingCertificate,
    builtin_certificate,
    verify_certificate,
)
from .lemma import stress_test
from .ordering import OrderStatus, order_chain
from .region import (
    AuxiliaryJoint,
    OptimizeOptions,
    maximize_weighted_sum,
    rates_from_aux,
    weight_sweep,
)

EXIT_OK, EXIT_VERDICT, EXIT_USAGE = 0, 1, 2


@dataclass
class ChannelSpec:
    """A parsed channel file."""

    bc: BroadcastChannel
    names: tuple[str, ...]
    input_labels: Optional[tuple[str, ...]] = None
    output_labels: dict = field(default_factory=dict)
    auxiliaries: dict = field(default_factory=dict)
    certificates: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, ChannelSpec):
            return NotImplemented
        return (
            self.bc.receivers == other.bc.receivers
            and self.names == other.names
            and self.input_labels == other.input_labels
            and self.output_labels == other.output_labels
            and self.auxiliaries == other.auxiliaries
            and self.certificates == other.certificates
        )

    def to_dict(self) -> dict:
        out: dict = {"input_size": self.bc.input_size}
        if self.input_labels is not None:
            out["input_labels"] = list(self.input_labels)
        receivers = []
        for name, w in zip(self.names, self.bc.receivers):
            entry = {"name": name, "rows": w.rows.tolist()}
            if name in self.output_labels:
                entry["output_labels"] = list(self.output_labels[name])
            receivers.append(entry)
        out["receivers"] = receivers
        if self.auxiliaries:
            out["auxiliaries"] = [
                {"name": name, "top": aux.top.tolist(), "chain": [c.rows.tolist() for c in aux.chain]}
                for name, aux in self.auxiliaries.items()
            ]
        if self.certificates:
            out["certificates"] = [
                {"name": name, "virtuals": [v.rows.tolist() for v in cert.virtuals]}
                for name, cert in self.certificates.items()
            ]
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


# ---------------------------------------------------------------------------
# parsing


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ParseError(f"{where}: missing field {key!r}")
    return obj[key]


def _list_of(value, where: str) -> list:
    if not isinstance(value, list):
        raise ParseError(f"{where}: expected a list, got {type(value).__name__}")
    return value


def _labels(value, size: int, where: str) -> tuple[str, ...]:
    labels = _list_of(value, where)
    if len(labels) != size or not all(isinstance(s, str) for s in labels):
        raise ParseError(f"{where}: expected {size} string labels")
    if len(set(labels)) != size:
        raise ParseError(f"{where}: labels must be unique")
    return tuple(labels)


def _matrix(value, where: str) -> ChannelMatrix:
    rows = _list_of(value, where)
    for r, row in enumerate(rows):
        for c, v in enumerate(_list_of(row, f"{where}[{r}]")):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ParseError(f"{where}[{r}][{c}]: expected a number, got {v!r}")
    return validate_channel(rows, context=where)


def _unique_names(entries: list, where: str) -> list[str]:
    names = []
    for i, e in enumerate(entries):
        if not isinstance(e, dict):
            raise ParseError(f"{where}[{i}]: expected an object")
        name = _require(e, "name", f"{where}[{i}]")
        if not isinstance(name, str) or not name:
            raise ParseError(f"{where}[{i}].name: expected a nonempty string")
        if name in names:
            raise ParseError(f"{where}[{i}].name: duplicate name {name!r}")
        names.append(name)
    return names


def parse_channel_spec(data, source: str = "<spec>") -> ChannelSpec:
    if not isinstance(data, dict):
        raise ParseError(f"{source}: top level must be an object")
    nx = _require(data, "input_size", source)
    if isinstance(nx, bool) or not isinstance(nx, int) or nx < 1:
        raise ParseError(f"{source}: input_size must be a positive integer")
    input_labels = None
    if "input_labels" in data:
        input_labels = _labels(data["input_labels"], nx, "input_labels")

    entries = _list_of(_require(data, "receivers", source), "receivers")
    names = _unique_names(entries, "receivers")
    receivers, output_labels = [], {}
    for i, (e, name) in enumerate(zip(entries, names)):
        where = f"receivers[{i}] ({name})"
        w = _matrix(_require(e, "rows", where), f"receivers[{i}].rows")
        if w.input_size != nx:
            raise ParseError(f"{where}: has {w.input_size} rows, input_size is {nx}")
        receivers.append(w)
        if "output_labels" in e:
            output_labels[name] = _labels(e["output_labels"], w.output_size, f"receivers[{i}].output_labels")
    bc = BroadcastChannel(tuple(receivers))

    auxiliaries = {}
    aux_entries = _list_of(data.get("auxiliaries", []), "auxiliaries")
    for i, (e, name) in enumerate(zip(aux_entries, _unique_names(aux_entries, "auxiliaries"))):
        where = f"auxiliaries[{i}]"
        chain = _list_of(_require(e, "chain", where), f"{where}.chain")
        factors = tuple(_matrix(c, f"{where}.chain[{j}]") for j, c in enumerate(chain))
        top = _list_of(_require(e, "top", where), f"{where}.top")
        aux = AuxiliaryJoint(np.array(top, dtype=float), factors)
        if aux.input_size != nx or aux.k != bc.k:
            raise ParseError(f"{where}: chain must end at the input and have {bc.k - 1} factors")
        auxiliaries[name] = aux

    certificates = {}
    cert_entries = _list_of(data.get("certificates", []), "certificates")
    for i, (e, name) in enumerate(zip(cert_entries, _unique_names(cert_entries, "certificates"))):
        where = f"certificates[{i}]"
        virtuals = _list_of(_require(e, "virtuals", where), f"{where}.virtuals")
        certificates[name] = InterleavingCertificate(
            tuple(_matrix(v, f"{where}.virtuals[{j}]") for j, v in enumerate(virtuals))
        )
    return ChannelSpec(bc, tuple(names), input_labels, output_labels, auxiliaries, certificates)


def parse_channel_file(path) -> ChannelSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_channel_spec(data, str(path))


# ---------------------------------------------------------------------------
# fixtures


def _bsc_rows(p: float) -> list:
    return [[1 - p, p], [p, 1 - p]]


def _bec_rows(e: float) -> list:
    return [[1 - e, e, 0.0], [0.0, e, 1 - e]]


def _receivers(*rows) -> list:
    return [{"name": f"Y{i}", "rows": r} for i, r in enumerate(rows, start=1)]


FIXTURES: dict[str, dict] = {
    "bsc_cascade": {
        "input_size": 2,
        "input_labels": ["0", "1"],
        "receivers": _receivers(_bsc_rows(0.1), _bsc_rows(0.2), _bsc_rows(0.3)),
        "auxiliaries": [
            {"name": "interior", "top": [0.8, 0.2], "chain": [_bsc_rows(0.06), _bsc_rows(0.025)]},
            {"name": "weak_cloud", "top": [0.5, 0.5], "chain": [[[1.0, 0.0], [0.0, 1.0]], _bsc_rows(0.1875)]},
        ],
    },
    "identity_two_receiver": {
        "input_size": 2,
        "receivers": _receivers([[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]]),
    },
    # BEC(0.3) is less noisy than BSC(0.1) but not degraded with respect to it
    "three_receiver": {
        "input_size": 2,
        "receivers": _receivers(_bec_rows(0.3), _bsc_rows(0.1), _bsc_rows(0.2)),
    },
    "constant_virtual": {
        "input_size": 2,
        "receivers": _receivers(_bsc_rows(0.1), _bsc_rows(0.2), _bsc_rows(0.3)),
        "certificates": [
            {"name": "constant_v1", "virtuals": [[[1.0], [1.0]], [[1.0]]]},
        ],
    },
    "reversed_pair": {
        "input_size": 2,
        "receivers": _receivers(_bsc_rows(0.2), _bsc_rows(0.1)),
    },
}


def fixture(name: str) -> ChannelSpec:
    return parse_channel_spec(FIXTURES[name], name)


def fixture_path(name: str) -> Path:
    """Location of a shipped fixture file."""
    return Path(__file__).with_name("fixtures") / f"{name}.json"


def write_fixtures(directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in FIXTURES:
        path = directory / f"{name}.json"
        path.write_text(fixture(name).dumps())
        paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class Output:
    def __init__(self, args, columns: Sequence[str]):
        self.args = args
        self.columns = list(columns)
        self.rows: list[list] = []

    def add(self, *row) -> None:
        self.rows.append(list(row))

    def render(self) -> str:
        buf = io.StringIO()
        if not self.args.no_header:
            stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
            buf.write(f"# lessnoisy {__version__} {self.args.command} {stamp}\n")
        if self.args.table:
            cells = [self.columns] + [
                [f"{v:.6f}" if isinstance(v, (float, np.floating)) else str(v) for v in row] for row in self.rows
            ]
            widths = [max(len(r[i]) for r in cells) for i in range(len(self.columns))]
            for r in cells:
                buf.write("  ".join(c.rjust(w) for c, w in zip(r, widths)).rstrip() + "\n")
        else:
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(self.columns)
            writer.writerows([[_fmt(v) for v in row] for row in self.rows])
        return buf.getvalue()

    def emit(self) -> None:
        text = self.render()
        if self.args.out:
            Path(self.args.out).write_text(text)
        else:
            sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def _floats(text: str, where: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        raise ParseError(f"{where}: expected comma-separated numbers, got {text!r}") from None


def _ints(text: str, where: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise ParseError(f"{where}: expected comma-separated integers, got {text!r}") from None


def _optimize_options(args) -> OptimizeOptions:
    caps = _ints(args.caps, "--caps") if args.caps else None
    return OptimizeOptions(args.restarts, args.iterations, args.seed, caps, args.tol, args.threads)


def cmd_check_order(args) -> int:
    spec = parse_channel_file(args.file)
    verdicts = order_chain(spec.bc, args.trials, args.tol, args.seed, args.threads)
    out = Output(args, ["stronger", "weaker", "status", "gap", "lam", "p0", "p1"])
    for l, v in enumerate(verdicts):
        w = v.witness
        row = [spec.names[l], spec.names[l + 1], v.status.value]
        if w is None:
            row += ["", "", "", ""]
        else:
            row += [w.gap, w.lam, " ".join(map(_fmt, w.p0)), " ".join(map(_fmt, w.p1))]
        out.add(*row)
    out.emit()
    return EXIT_OK if all(v.status is not OrderStatus.NOT_LESS_NOISY for v in verdicts) else EXIT_VERDICT


def _region(args, k_required: Optional[int]) -> int:
    spec = parse_channel_file(args.file)
    if k_required is not None and spec.bc.k != k_required:
        raise ParseError(f"{args.file}: two-region needs exactly 2 receivers, got {spec.bc.k}")
    opts = _optimize_options(args)
    if args.weights:
        directions = [_floats(args.weights, "--weights")]
    else:
        directions = weight_sweep(spec.bc.k, args.directions)
    k = spec.bc.k
    out = Output(args, [f"w{l}" for l in range(1, k + 1)] + [f"R{l}" for l in range(1, k + 1)] + ["value"])
    for d, weights in enumerate(directions):
        o = OptimizeOptions(opts.restarts, opts.iterations, opts.seed + 1000 * d, opts.caps, opts.tol, opts.threads)
        rates, _ = maximize_weighted_sum(spec.bc, weights, o)
        out.add(*[float(w) for w in weights], *rates, rates.weighted(weights))
    out.emit()
    return EXIT_OK


def cmd_region(args) -> int:
    return _region(args, None)


def cmd_two_region(args) -> int:
    return _region(args, 2)


def _sim_aux_and_rates(args, spec: ChannelSpec):
    if args.aux:
        if args.aux not in spec.auxiliaries:
            raise ParseError(f"--aux: no auxiliary named {args.aux!r} in {args.file}")
        aux = spec.auxiliaries[args.aux]
        base = rates_from_aux(aux, spec.bc).rates
    elif args.boundary:
        rates, aux = maximize_weighted_sum(spec.bc, _floats(args.boundary, "--boundary"), _optimize_options(args))
        base = rates.rates
    else:
        aux = AuxiliaryJoint.trivial(np.full(spec.bc.input_size, 1.0 / spec.bc.input_size), spec.bc.k)
        base = (0.0,) * spec.bc.k
    if args.rates:
        rates = _floats(args.rates, "--rates")
    else:
        rates = tuple(args.fraction * r for r in base)
    return aux, rates


def cmd_simulate(args) -> int:
    spec = parse_channel_file(args.file)
    aux, rates = _sim_aux_and_rates(args, spec)
    stages = [(1, "u"), (1, "v"), (1, "x"), (2, "u"), (2, "v"), (3, "u")]
    out = Output(
        args,
        ["n", "R1", "R2", "R3", "M1", "M2", "M3", "trials", "errors", "p_e", "ci_low", "ci_high",
         "rx1", "rx2", "rx3"] + [f"rx{l}_{s}" for l, s in stages],
    )
    for n in _ints(args.n, "--n"):
        config = SimConfig(
            n=n, rates=rates, aux=aux, bc=spec.bc, trials=args.trials, seed=args.seed,
            threshold_delta=args.delta, fixed_codebook=args.fixed_codebook, threads=args.threads,
        )
        res = run_trials(config)
        lo, hi = res.p_e_interval
        out.add(
            n, *config.rates, *config.message_counts, res.trials, res.total_errors, res.p_e_estimate, lo, hi,
            *(res.receiver_fraction(l) for l in (1, 2, 3)),
            *(res.stage_fraction(l, s) for l, s in stages),
        )
    out.emit()
    return EXIT_OK


def _receiver_index(spec: ChannelSpec, token: str) -> int:
    if token in spec.names:
        return spec.names.index(token)
    try:
        i = int(token) - 1
    except ValueError:
        raise ParseError(f"--pair: unknown receiver {token!r}") from None
    if not 0 <= i < spec.bc.k:
        raise ParseError(f"--pair: receiver index {token} out of range 1..{spec.bc.k}")
    return i


def cmd_verify_lemma(args) -> int:
    spec = parse_channel_file(args.file)
    tokens = args.pair.split(",")
    if len(tokens) != 2:
        raise ParseError("--pair: expected two receivers, e.g. 1,2")
    s, t = (_receiver_index(spec, tok) for tok in tokens)
    res = stress_test(
        spec.bc[s], spec.bc[t], args.trials, args.seed,
        _ints(args.blocklengths, "--blocklengths"), _ints(args.m_sizes, "--m-sizes"), threads=args.threads,
    )
    out = Output(args, ["stronger", "weaker", "instances", "min_slack", "violated", "violation_index"])
    out.add(spec.names[s], spec.names[t], res.count, res.min_slack, res.violated,
            "" if res.violation_index is None else res.violation_index)
    out.emit()
    if res.violated:
        dump = json.dumps(res.violating_instance.to_dict())
        if args.dump:
            Path(args.dump).write_text(dump + "\n")
        else:
            sys.stderr.write(f"violating instance: {dump}\n")
        return EXIT_VERDICT
    return EXIT_OK


def cmd_interleave(args) -> int:
    spec = parse_channel_file(args.file)
    if args.certificate:
        if args.certificate not in spec.certificates:
            raise ParseError(f"--certificate: no certificate named {args.certificate!r} in {args.file}")
        cert = spec.certificates[args.certificate]
    else:
        cert = builtin_certificate(spec.bc, args.builtin, args.tol)
    report = verify_certificate(spec.bc, cert, args.trials, args.tol, args.seed, args.threads)
    out = Output(args, ["stronger", "weaker", "status", "gap"])
    for link in report.links:
        w = link.verdict.witness
        out.add(link.stronger, link.weaker, link.verdict.status.value, "" if w is None else w.gap)
    out.add("certificate", "", report.status.value, "")
    out.emit()
    return EXIT_VERDICT if report.status is CertificateStatus.FAIL else EXIT_OK


def cmd_gen_examples(args) -> int:
    directory = Path(args.out) if args.out else Path.cwd()
    for path in write_fixtures(directory):
        print(path)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser, trials: int) -> None:
    p.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    p.add_argument("--trials", type=int, default=trials)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--no-header", action="store_true", help="omit the timestamp comment line")
    p.add_argument("--table", action="store_true", help="aligned table with 6 decimals instead of CSV")
    p.add_argument("--out", help="write output here instead of stdout")


def _optimizer_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--caps", help="auxiliary alphabet caps |U_k|,...,|U_2|")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lessnoisy", description="Less noisy broadcast channel toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-order", help="less noisy verdict for each adjacent receiver pair")
    p.add_argument("file")
    _common(p, 10_000)
    p.set_defaults(func=cmd_check_order)

    for name, func, helptext in (
        ("region", cmd_region, "weighted-sum boundary points of the k-receiver region"),
        ("two-region", cmd_two_region, "weighted-sum boundary points of the 2-receiver region"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("file")
        p.add_argument("--weights", help="single weight vector, e.g. 1,0,0")
        p.add_argument("--directions", type=int, default=10, help="sweep size when --weights is absent")
        _optimizer_flags(p)
        _common(p, 0)
        p.set_defaults(func=func)

    p = sub.add_parser("simulate", help="Monte Carlo superposition coding on a 3-receiver channel")
    p.add_argument("file")
    p.add_argument("--n", default="64,128,256", help="comma-separated blocklengths")
    p.add_argument("--rates", help="R1,R2,R3 in bits per use")
    p.add_argument("--aux", help="named auxiliary chain from the file")
    p.add_argument("--boundary", help="weights of a boundary point to compute the auxiliary from")
    p.add_argument("--fraction", type=float, default=0.85, help="rate fraction of the auxiliary's rates")
    p.add_argument("--delta", type=float, default=None, help="threshold margin in bits (default 0.1 x target)")
    p.add_argument("--fixed-codebook", action="store_true")
    _optimizer_flags(p)
    _common(p, 500)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify-lemma", help="search random instances for a negative multi-letter slack")
    p.add_argument("file")
    p.add_argument("--pair", default="1,2", help="stronger,weaker receivers (names or 1-based indices)")
    p.add_argument("--blocklengths", default="2")
    p.add_argument("--m-sizes", default="2")
    p.add_argument("--dump", help="write a violating instance as JSON here")
    _common(p, 1000)
    p.set_defaults(func=cmd_verify_lemma)

    p = sub.add_parser("interleave", help="verify an interleavability certificate")
    p.add_argument("file")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--certificate", help="named certificate from the file")
    group.add_argument("--builtin", choices=BUILTIN_KINDS, default="degraded")
    _common(p, 10_000)
    p.set_defaults(func=cmd_interleave)

    p = sub.add_parser("gen-examples", help="write the shipped fixture files")
    p.add_argument("--out", help="target directory (default: current directory)")
    p.set_defaults(func=cmd_gen_examples)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (LessNoisyError, ValueError) as exc:
        print(f"lessnoisy {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
