"""Command-line harness: build a network, feed a stream file, write a report.

    snnsketch run   --sketch countmin --n 1024 --eps 0.1 --delta 0.1 --stream s.txt
    snnsketch bench --sketch loglog --n 1024 --eps 0.5 --delta 0.25 --trials 300

Reports are plain `key=value` lines with a blank line between blocks.  Exit
status is 0 on success, 2 for usage or parse errors and 1 when an operation
violates a builder contract (item out of range, stream longer than m, ...).
"""

from __future__ import annotations

import argparse
import sys
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .countmin import CountMinParams, build_countmin_net, cm_aux_budget, cm_latency_budget
from .distinct import LogLogParams, build_distinct_net, dn_aux_budget, dn_latency_budget
from .gadgets import bit_width
from .linsketch import build_linsketch_net, load_matrix, ls_aux_budget, ls_latency_budget
from .median import MedianParams, build_median_net, md_aux_budget, md_insert_latency_budget, md_latency_budget
from .oracles import brute_distinct, is_member, median_ok, rank_interval
from .stream import StreamParseError, StreamUpdate, read_stream

SKETCHES = ("countmin", "loglog", "median", "linsketch")
QUERY_KIND = {"countmin": "count", "loglog": "distinct", "median": "median"}


class UsageError(Exception):
    pass


def _next_pow2(v: int) -> int:
    return 1 << max(1, (v - 1).bit_length())


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.6f}"
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def block(pairs) -> str:
    return "".join(f"{k}={_fmt(v)}\n" for k, v in pairs) + "\n"


# sketch adapters ----------------------------------------------------------------


@dataclass
class Session:
    """A built network plus the exact and oracle shadows fed alongside it."""

    kind: str
    obj: object
    eps: float = 0.0
    scale: int = 1
    stream: list = field(default_factory=list)
    freq: Counter = field(default_factory=Counter)
    oracle: object = None

    @property
    def net(self):
        return self.obj.net

    @property
    def machine(self):
        return self.obj.machine

    def reseed(self, seed: int) -> None:
        if self.kind == "linsketch":
            self.machine.reset()
        else:
            self.obj.reseed(seed)
        self.stream, self.freq = [], Counter()
        self.oracle = self.obj.oracle()

    def feed(self, u: StreamUpdate) -> None:
        if u.kind == "del" and self.kind != "linsketch":
            raise UsageError("'del' is only valid for the linear sketch")
        if self.kind == "linsketch":
            sign = 1 if u.kind == "ins" else -1
            self.obj.update(u.item, sign)
            self.oracle.update(u.item, sign)
        elif self.kind == "countmin":
            self.obj.inc(u.item)
            self.oracle.inc(u.item)
        else:
            self.obj.insert(u.item)
            self.oracle.insert(u.item)
        self.freq[u.item] += 1 if u.kind == "ins" else -1
        if u.kind == "ins":
            self.stream.append(u.item)

    def ask(self, u: StreamUpdate, oracle_check: bool, trace: bool) -> tuple[list, bool]:
        """Answer a query; returns the report pairs and whether the answer meets its guarantee."""
        want = QUERY_KIND.get(self.kind)
        if u.kind != want:
            raise UsageError(f"'{u.kind}' is not a query of the {self.kind} sketch")
        pairs: list = [("query", u.to_line())]
        if u.kind == "count":
            ans = self.obj.count(u.item)
            f = self.freq[u.item]
            ok = f <= ans <= f + self.eps * len(self.stream)
            pairs += [("answer", ans), ("truth", f)]
            if oracle_check:
                orc = self.oracle.count(u.item)
                pairs += [("oracle", orc), ("oracle_match", orc == ans)]
        elif u.kind == "distinct":
            S, E = self.obj.read_estimate()
            D = brute_distinct(self.stream)
            ok = abs(E / D - 1) <= self.eps if D else E == 0
            pairs += [("answer", E), ("sum", S), ("truth", D)]
            if oracle_check:
                orc = self.oracle.estimate()
                pairs += [("oracle", orc), ("oracle_match", self.oracle.median_sum() == S)]
        else:
            res = self.obj.query()
            if res.item is None:
                ok = not self.stream
                pairs += [("answer", None), ("no_median", True), ("truth", None)]
            else:
                lo, hi = rank_interval(self.stream, res.item)
                ok = median_ok(self.stream, res.item, self.eps)
                srt = sorted(self.stream)
                pairs += [("answer", res.item), ("truth", srt[(len(srt) - 1) // 2]), ("rank_lo", lo),
                          ("rank_hi", hi), ("member", is_member(self.stream, res.item)), ("forced", res.forced)]
            if oracle_check:
                orc = self.oracle.query()
                same = orc.item == res.item
                if res.item is not None:
                    same = same and [e.to_line() for e in orc.trace] == [e.to_line() for e in res.trace]
                pairs += [("oracle", orc.item), ("oracle_match", same)]
            if trace:
                pairs += [("trace", e.to_line()) for e in res.trace]
        pairs += [("ok", ok), ("rounds", self.machine.latencies[-1])]
        return pairs, ok

    def final(self, oracle_check: bool) -> tuple[list, bool]:
        """Linear sketch reading after the whole stream (scaled back for rational matrices)."""
        got = self.obj.read_sketch()
        z = np.zeros(self.obj.n, dtype=np.int64)
        for x, c in self.freq.items():
            z[x - 1] = c
        truth = [int(v) for v in self.obj.A @ z]
        pairs: list = [("query", "sketch"), ("scale", self.scale), ("answer", got), ("truth", truth)]
        if oracle_check:
            orc = self.oracle.reading()
            pairs += [("oracle", orc), ("oracle_match", orc == got)]
        ok = got == truth
        pairs += [("ok", ok)]
        return pairs, ok

    def budgets(self) -> tuple[float, float, float | None]:
        """(aux budget, update latency budget, query latency budget)."""
        o = self.obj
        if self.kind == "countmin":
            b = cm_latency_budget(o.p)
            return cm_aux_budget(o.p), b, b
        if self.kind == "loglog":
            return dn_aux_budget(o.p), dn_latency_budget(o.p), None
        if self.kind == "median":
            return md_aux_budget(o.p), md_insert_latency_budget(o.p), md_latency_budget(o.p)
        return ls_aux_budget(o.r, o.ell), ls_latency_budget(o.ell), None


def build_session(args, updates: list[StreamUpdate]) -> Session:
    kind = args.sketch
    inserts = sum(1 for u in updates if u.kind in ("ins", "del"))
    if kind == "linsketch":
        if not args.matrix:
            raise UsageError("--matrix is required for the linear sketch")
        try:
            A, scale = load_matrix(args.matrix)
        except (OSError, ValueError) as exc:
            raise UsageError(f"matrix: {exc}") from None
        if args.n is not None and args.n != A.shape[1]:
            raise UsageError(f"--n {args.n} does not match the matrix width {A.shape[1]}")
        bound = max(1, int(np.abs(A).max()) * max(inserts, args.m or 0))
        ell = args.ell if args.ell is not None else bit_width(bound)
        obj = build_linsketch_net(A, ell)
        return Session(kind, obj, scale=scale, oracle=obj.oracle())
    missing = [f for f in ("n", "eps", "delta") if getattr(args, f) is None]
    if missing:
        raise UsageError(f"--{', --'.join(missing)} required for the {kind} sketch")
    m = args.m if args.m is not None else max(1, inserts)
    try:
        if kind == "countmin":
            obj = build_countmin_net(CountMinParams(args.n, m, args.eps, args.delta, args.seed))
        elif kind == "loglog":
            obj = build_distinct_net(LogLogParams(args.n, args.eps, args.delta, args.seed))
        else:
            if args.m is None:
                m = _next_pow2(m)
            obj = build_median_net(MedianParams(args.n, m, args.eps, args.delta, args.seed))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return Session(kind, obj, eps=args.eps, oracle=obj.oracle())


def header(s: Session) -> list:
    aux_b, upd_b, q_b = s.budgets()
    net = s.net
    pairs = [("sketch", s.kind)] + [(k, v) for k, v in net.params.items()]
    pairs += [("neurons", net.n_neurons), ("synapses", net.n_synapses), ("aux", net.aux_count()),
              ("aux_budget", float(aux_b)), ("update_latency_budget", float(upd_b))]
    if q_b is not None:
        pairs.append(("query_latency_budget", float(q_b)))
    return pairs


# commands ---------------------------------------------------------------------------


def _load_updates(args) -> list[StreamUpdate]:
    if not args.stream:
        return []
    try:
        return read_stream(args.stream)
    except StreamParseError as exc:
        raise UsageError(f"{args.stream}: {exc}") from None
    except OSError as exc:
        raise UsageError(str(exc)) from None


def _write(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def cmd_run(args) -> int:
    if not args.stream:
        raise UsageError("--stream is required for run")
    updates = _load_updates(args)
    s = build_session(args, updates)
    if args.export_net:
        _write(args.export_net, s.net.to_text())
    out = [block(header(s))]
    n_queries = failed = mismatched = 0
    for lineno, u in enumerate(updates, start=1):
        if u.is_query:
            pairs, ok = s.ask(u, args.oracle_check, args.trace)
            n_queries += 1
            failed += not ok
            mismatched += dict(pairs).get("oracle_match") is False
            out.append(block([("index", lineno)] + pairs))
        else:
            s.feed(u)
            if args.trace:
                out.append(block([("index", lineno), ("update", u.to_line()), ("rounds", s.machine.latencies[-1])]))
    if s.kind == "linsketch":
        pairs, ok = s.final(args.oracle_check)
        n_queries += 1
        failed += not ok
        mismatched += dict(pairs).get("oracle_match") is False
        out.append(block(pairs))
    lat = s.machine.latencies
    summary = [("updates", sum(not u.is_query for u in updates)), ("queries", n_queries), ("failed", failed),
               ("max_rounds", max(lat) if lat else 0)]
    if args.oracle_check:
        summary.append(("oracle_mismatches", mismatched))
    out.append(block(summary))
    _write(args.report, "".join(out))
    return 0


def synthetic_stream(kind: str, n: int, m: int, rng, r: int = 0) -> list[StreamUpdate]:
    """Default bench workload: m uniform inserts (signed for the linear sketch) and one query."""
    items = [int(v) for v in rng.integers(1, n + 1, size=m)]
    if kind == "linsketch":
        signs = rng.random(m) < 0.5
        return [StreamUpdate("del" if sg else "ins", x) for x, sg in zip(items, signs)]
    ups = [StreamUpdate("ins", x) for x in items]
    if kind == "countmin":
        return ups + [StreamUpdate("count", items[int(rng.integers(0, m))])]
    return ups + [StreamUpdate(QUERY_KIND[kind])]


def _percentiles(vals) -> list:
    if not vals:
        return [0, 0, 0, 0]
    a = np.asarray(vals)
    return [int(np.percentile(a, q, method="higher")) for q in (50, 90, 99)] + [int(a.max())]


def cmd_bench(args) -> int:
    trials = args.trials if args.trials is not None else 1
    if trials < 1:
        raise UsageError("--trials must be >= 1")
    fixed = _load_updates(args)
    if not fixed:
        if args.sketch == "linsketch":
            if args.m is None:
                raise UsageError("--m (stream length) is required for a synthetic linear-sketch bench")
        elif args.n is None:
            raise UsageError(f"--n is required for the {args.sketch} sketch")
        if args.sketch == "median" and args.m is None:
            raise UsageError("--m is required for a synthetic median bench")
        length = args.m if args.m is not None else args.n
        probe = [StreamUpdate("ins", 1)] * length
    else:
        probe = fixed
    s = build_session(args, probe)
    n = s.obj.n if s.kind == "linsketch" else s.obj.p.n
    out = [block(header(s) + [("trials", trials)])]
    fails = 0
    upd_lat, q_lat = [], []
    for t in range(trials):
        seed = args.seed + t
        s.reseed(seed)
        if fixed:
            updates = fixed
        else:
            updates = synthetic_stream(s.kind, n, length, np.random.default_rng([seed, 1]))
        last, ok_all = None, True
        for u in updates:
            if u.is_query:
                last, ok = s.ask(u, args.oracle_check, False)
                ok_all &= ok
                q_lat.append(s.machine.latencies[-1])
            else:
                s.feed(u)
                upd_lat.append(s.machine.latencies[-1])
        if s.kind == "linsketch":
            last, ok = s.final(args.oracle_check)
            ok_all &= ok
        d = dict(last)
        row = [("trial", t), ("seed", seed), ("answer", d["answer"]), ("truth", d["truth"]), ("pass", ok_all)]
        if args.oracle_check:
            row.append(("oracle_match", d.get("oracle_match")))
        out.append(block(row))
        fails += not ok_all
    p_u, p_q = _percentiles(upd_lat), _percentiles(q_lat)
    agg = [("trials", trials), ("failures", fails), ("failure_rate", fails / trials)]
    for name, p in (("update", p_u), ("query", p_q)):
        agg += [(f"{name}_rounds_p50", p[0]), (f"{name}_rounds_p90", p[1]), (f"{name}_rounds_p99", p[2]),
                (f"{name}_rounds_max", p[3])]
    out.append(block(agg))
    _write(args.report, "".join(out))
    return 0


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="snnsketch", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "feed one stream file and answer its queries"),
                        ("bench", "repeat a workload over consecutive seeds")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--sketch", choices=SKETCHES, required=True)
        p.add_argument("--n", type=int, help="universe size (items are 1..n)")
        p.add_argument("--m", type=int, help="stream length bound (default: from the stream)")
        p.add_argument("--eps", type=float)
        p.add_argument("--delta", type=float)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--stream", help="stream file")
        p.add_argument("--matrix", help="matrix file for the linear sketch")
        p.add_argument("--ell", type=int, help="linear sketch output bits (default: from the stream)")
        p.add_argument("--report", help="report path (default: stdout)")
        p.add_argument("--trials", type=int)
        p.add_argument("--export-net", dest="export_net", help="write the network in text form")
        p.add_argument("--trace", action="store_true", help="per-update blocks and median search traces")
        p.add_argument("--oracle-check", dest="oracle_check", action="store_true",
                       help="compare every answer with the shared-randomness oracle")
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return cmd_run(args) if args.command == "run" else cmd_bench(args)
    except UsageError as exc:
        print(f"snnsketch: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OverflowError, RuntimeError) as exc:
        print(f"snnsketch: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
