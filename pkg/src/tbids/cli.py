"""``tbids`` command-line tool.

Exit codes: 0 success or VALID, 1 INVALID, 2 usage or validation error,
3 I/O error. Failures print one line to stderr::

    error: kind=<kind> code=<n> message=<text>
"""

from __future__ import annotations

import argparse
import asyncio
import logging
import statistics
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from . import codec, group, storage
from .epochs import DEFAULT_EPOCH_LENGTH, EpochConfig, EpochError, epoch_from_timestamp
from .timebound import (
    FLAT,
    FS,
    SCHEMES,
    DelegatedEpochKey,
    FlatMasterKey,
    FsSecretKeyState,
    NotCurrentEpoch,
    TbidsParams,
    flat_delegate,
    flat_gen,
    fs_del,
    fs_gen,
    fs_update,
    matching_epoch,
    setup,
    sign,
    verify,
)

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, kind: str, code: int, message: str):
        super().__init__(message)
        self.kind = kind
        self.code = code


def usage_error(message: str) -> CliError:
    return CliError("usage", EXIT_USAGE, message)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise usage_error(message)


# -- file helpers ----------------------------------------------------------------


def _read(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def _load(path: str, kind: codec.Kind):
    return codec.load(_read(path), kind)


def _write_public(path: str, data: bytes) -> None:
    if path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        storage.atomic_write(path, data, mode=0o644)


def _write_secret(path: str, data: bytes) -> None:
    storage.atomic_write(path, data, mode=0o600)


def _dump(obj, args) -> bytes:
    return codec.dump(obj, text=not getattr(args, "binary", False))


def _identity(levels: Sequence[str]):
    out = tuple(level.encode() for level in levels)
    if not out or not all(out):
        raise usage_error("--id needs one or more non-empty levels")
    return out


def _epoch_config(args) -> EpochConfig:
    if getattr(args, "epoch_config", None):
        cfg = _load(args.epoch_config, codec.Kind.EPOCH_CONFIG)
        if args.window is not None:
            cfg = EpochConfig(cfg.t0, cfg.epoch_length, args.window)
        return cfg
    window = args.window if args.window is not None else 1
    return EpochConfig(t0=args.t0, epoch_length=args.epoch_length, window=window)


def _timestamp(args) -> float:
    return args.ts if args.ts is not None else time.time()


def _target_epoch(args) -> int:
    if args.epoch is not None:
        if args.epoch < 0:
            raise usage_error("--epoch must be non-negative")
        return args.epoch
    return epoch_from_timestamp(_timestamp(args), _epoch_config(args))


# -- commands --------------------------------------------------------------------


def cmd_setup(args) -> int:
    n = args.epochs
    if n < 2 or n & (n - 1):
        raise usage_error("--epochs must be a power of two >= 2")
    if not 1 <= args.levels <= 16:
        raise usage_error("--levels must be between 1 and 16")
    tag = args.tag.encode()
    if not 1 <= len(tag) <= 255:
        raise usage_error("--tag must be 1 to 255 bytes")
    cfg = _epoch_config(args) if args.config_out else None
    params = setup(n, group.system_rng(), identity_levels=args.levels, tag=tag)
    _write_public(args.out, _dump(params, args))
    if cfg is not None:
        _write_public(args.config_out, _dump(cfg, args))
    return EXIT_OK


def cmd_keygen(args) -> int:
    params = _load(args.params, codec.Kind.PARAMS)
    rng = group.system_rng()
    if args.scheme == FLAT:
        pk, sk = flat_gen(params, rng)
    else:
        pk, sk = fs_gen(params, rng)
    _write_secret(args.out_sk, _dump(sk, args))
    _write_public(args.out_pk, _dump(pk, args))
    return EXIT_OK


def cmd_epoch(args) -> int:
    cfg = _epoch_config(args)
    e = epoch_from_timestamp(_timestamp(args), cfg)
    print(f"epoch={e}")
    print(f"start={cfg.epoch_start(e)}")
    print(f"end={cfg.epoch_start(e + 1)}")
    if args.state:
        state = _load(args.state, codec.Kind.FS_STATE)
        print(f"state_epoch={state.current_epoch}")
        print(f"remaining={state.params.n - state.current_epoch}")
    return EXIT_OK


def cmd_delegate(args) -> int:
    identity = _identity(args.id)
    epoch = _target_epoch(args)
    rng = group.system_rng()
    if args.sk:
        master: FlatMasterKey = _load(args.sk, codec.Kind.MASTER_SK)
        if epoch >= master.params.n:
            raise usage_error(f"epoch {epoch} outside [0, {master.params.n})")
        key = flat_delegate(master, epoch, identity, rng)
    else:
        state: FsSecretKeyState = _load(args.state, codec.Kind.FS_STATE)
        key = fs_del(state, identity, rng, epoch=epoch)
    _write_secret(args.out, _dump(key, args))
    return EXIT_OK


def cmd_update(args) -> int:
    with storage.locked(args.state):
        state: FsSecretKeyState = _load(args.state, codec.Kind.FS_STATE)
        fs_update(state, group.system_rng())
        _write_secret(args.state, _dump(state, args))
    print(f"epoch={state.current_epoch}")
    return EXIT_OK


def cmd_sign(args) -> int:
    key: DelegatedEpochKey = _load(args.key, codec.Kind.DELEGATED_EPOCH_KEY)
    msg = _read(args.input)
    sig = sign(key, msg, group.system_rng())
    _write_public(args.out, _dump(sig, args))
    return EXIT_OK


def cmd_verify(args) -> int:
    params: TbidsParams = _load(args.params, codec.Kind.PARAMS)
    pk = _load(args.pk, codec.Kind.MASTER_PK)
    identity = _identity(args.id)
    msg = _read(args.input)
    sig = _load(args.sig, codec.Kind.SIGNATURE)
    if args.epoch is not None:
        window = args.window if args.window is not None else 0
        ok = matching_epoch(params, args.scheme, pk, _target_epoch(args), identity, msg, sig, window) is not None
    else:
        cfg = _epoch_config(args)
        window = args.window if args.window is not None else cfg.window
        e = epoch_from_timestamp(_timestamp(args), cfg)
        ok = matching_epoch(params, args.scheme, pk, e, identity, msg, sig, window) is not None
    print("VALID" if ok else "INVALID")
    return EXIT_OK if ok else EXIT_INVALID


def _time_ms(fn: Callable[[], object], iters: int) -> List[float]:
    out = []
    for _ in range(iters):
        start = time.perf_counter()
        fn()
        out.append((time.perf_counter() - start) * 1000)
    return out


def run_bench(iters: int, epochs: int = 1 << 20, schemes: Sequence[str] = SCHEMES) -> Dict[str, float]:
    """Median and mean milliseconds of delegate/sign/verify per scheme."""
    rng = group.system_rng()
    params = setup(epochs, rng)
    identity = (b"bench.example",)
    msg = b"handshake transcript hash".ljust(32, b".")
    metrics: Dict[str, float] = {}
    for scheme in schemes:
        if scheme == FLAT:
            pk, master = flat_gen(params, rng)
            epoch = epochs // 3
            delegate = lambda: flat_delegate(master, epoch, identity, rng)  # noqa: E731
        else:
            pk, state = fs_gen(params, rng)
            epoch = 0
            delegate = lambda: fs_del(state, identity, rng)  # noqa: E731
        key = delegate()
        sig = sign(key, msg, rng)
        runs = {
            "delegate": _time_ms(delegate, iters),
            "sign": _time_ms(lambda: sign(key, msg, rng), iters),
            "verify": _time_ms(lambda: verify(params, scheme, pk, epoch, identity, msg, sig), iters),
        }
        for op, samples in runs.items():
            metrics[f"{scheme}.{op}.median_ms"] = statistics.median(samples)
            metrics[f"{scheme}.{op}.mean_ms"] = statistics.fmean(samples)
    return metrics


def cmd_bench(args) -> int:
    if args.iters < 1:
        raise usage_error("--iters must be positive")
    schemes = SCHEMES if args.scheme == "both" else (args.scheme,)
    print(f"iters={args.iters}")
    print(f"epochs={args.epochs}")
    for name, value in run_bench(args.iters, args.epochs, schemes).items():
        print(f"{name}={value:.4f}")
    return EXIT_OK


# -- harness ---------------------------------------------------------------------


def _address(text: str):
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise usage_error(f"address {text!r} is not host:port")
    return host or "127.0.0.1", int(port)


def _authenticator(args):
    from .harness.wire import PskAuthenticator

    psk = _read(args.psk_file).strip()
    try:
        return PskAuthenticator(psk)
    except ValueError as exc:
        raise usage_error(str(exc)) from None


def cmd_keyserver(args) -> int:
    from .harness.keyserver import keyserver_run

    result = asyncio.run(
        keyserver_run(
            args.state, _address(args.edge), _epoch_config(args), _identity(args.id), _authenticator(args), once=args.once
        )
    )
    if result is not None:
        print(f"pushed={','.join(map(str, result.pushed)) or '-'}")
        print(f"pending={','.join(map(str, result.pending)) or '-'}")
        print(f"state_epoch={result.state_epoch}")
        if result.pending:
            return EXIT_IO
    return EXIT_OK


def cmd_edge(args) -> int:
    from .harness.edge import edge_run

    pk = _load(args.pk, codec.Kind.MASTER_PK)
    asyncio.run(edge_run(_address(args.listen), codec.point_bytes(pk), _authenticator(args), _epoch_config(args)))
    return EXIT_OK


def cmd_connect(args) -> int:
    from .harness.client import client_connect

    params = _load(args.params, codec.Kind.PARAMS)
    pk = _load(args.pk, codec.Kind.MASTER_PK)
    cfg = _epoch_config(args)
    report = asyncio.run(
        client_connect(_address(args.edge), _identity(args.id), params, pk, cfg, now=args.ts, scheme=FS)
    )
    print(report.line())
    if report.network_error:
        return EXIT_IO
    return EXIT_OK if report.accepted else EXIT_INVALID


def cmd_scenario(args) -> int:
    from .harness import scenario

    if args.list:
        print("\n".join(scenario.bundled_names()))
        return EXIT_OK
    if not args.script:
        raise usage_error("scenario needs a script path or bundled name (see --list)")
    lines = scenario.scenario_run(args.script)
    print("\n".join(lines))
    if args.check:
        expected = Path(args.check).read_text().splitlines()
        if lines != expected:
            print("error: kind=scenario code=1 message=report differs from expected", file=sys.stderr)
            return EXIT_INVALID
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def _add_epoch_config(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("epoch configuration")
    g.add_argument("--epoch-config", help="EPOCH_CONFIG envelope file (overrides --t0/--epoch-length)")
    g.add_argument("--t0", type=int, default=0, help="epoch origin, unix seconds")
    g.add_argument("--epoch-length", type=int, default=DEFAULT_EPOCH_LENGTH, help="seconds per epoch")
    g.add_argument("--window", type=int, default=None, help="neighbouring epochs to accept")


def _add_when(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--epoch", type=int)
    g.add_argument("--now", action="store_true", help="derive the epoch from the clock")
    p.add_argument("--ts", type=float, default=None, help="use this unix time instead of the system clock")
    _add_epoch_config(p)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tbids", description="Time-bound identity-based signatures.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("setup", help="generate public parameters")
    p.add_argument("--epochs", type=int, default=1 << 20, help="number of epochs, a power of two")
    p.add_argument("--levels", type=int, default=1, help="identity levels")
    p.add_argument("--tag", default="tbids-v1", help="domain-separation tag")
    p.add_argument("--out", required=True)
    p.add_argument("--config-out", help="also write an EPOCH_CONFIG envelope here")
    _add_epoch_config(p)
    p.set_defaults(func=cmd_setup)

    p = sub.add_parser("keygen", help="generate a master key pair")
    p.add_argument("--scheme", choices=SCHEMES, default=FS)
    p.add_argument("--params", required=True)
    p.add_argument("--out-pk", required=True)
    p.add_argument("--out-sk", required=True)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("epoch", help="show the epoch for a time")
    p.add_argument("--now", action="store_true", help="use the system clock (default)")
    p.add_argument("--ts", type=float, default=None)
    p.add_argument("--state", help="also report a key state's epoch")
    _add_epoch_config(p)
    p.set_defaults(func=cmd_epoch)

    p = sub.add_parser("delegate", help="derive a key for one (epoch, identity)")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--sk", help="flat master key")
    src.add_argument("--state", help="forward-secure key state")
    _add_when(p)
    p.add_argument("--id", nargs="+", required=True, metavar="LEVEL")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_delegate)

    p = sub.add_parser("update", help="advance a forward-secure state by one epoch")
    p.add_argument("--state", required=True)
    p.set_defaults(func=cmd_update)

    p = sub.add_parser("sign", help="sign a message with a delegated key")
    p.add_argument("--key", required=True)
    p.add_argument("--in", dest="input", default="-")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_sign)

    p = sub.add_parser("verify", help="verify a signature")
    p.add_argument("--params", required=True)
    p.add_argument("--pk", required=True)
    p.add_argument("--scheme", choices=SCHEMES, default=FS)
    p.add_argument("--id", nargs="+", required=True, metavar="LEVEL")
    _add_when(p)
    p.add_argument("--in", dest="input", default="-")
    p.add_argument("--sig", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="time delegate, sign and verify")
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--epochs", type=int, default=1 << 20)
    p.add_argument("--scheme", choices=(*SCHEMES, "both"), default="both")
    p.set_defaults(func=cmd_bench)

    h = sub.add_parser("harness", help="networked delegation simulation")
    hsub = h.add_subparsers(dest="role", required=True, parser_class=_Parser)

    p = hsub.add_parser("keyserver", help="derive and push epoch keys to an edge")
    p.add_argument("--state", required=True)
    p.add_argument("--edge", required=True, metavar="HOST:PORT")
    p.add_argument("--id", nargs="+", required=True, metavar="LEVEL")
    p.add_argument("--psk-file", required=True)
    p.add_argument("--once", action="store_true", help="run one step and exit")
    _add_epoch_config(p)
    p.set_defaults(func=cmd_keyserver)

    p = hsub.add_parser("edge", help="serve handshakes with pushed keys")
    p.add_argument("--listen", default="127.0.0.1:4433", metavar="HOST:PORT")
    p.add_argument("--pk", required=True)
    p.add_argument("--psk-file", required=True)
    _add_epoch_config(p)
    p.set_defaults(func=cmd_edge)

    p = hsub.add_parser("connect", help="one client handshake")
    p.add_argument("--edge", required=True, metavar="HOST:PORT")
    p.add_argument("--params", required=True)
    p.add_argument("--pk", required=True)
    p.add_argument("--id", nargs="+", required=True, metavar="LEVEL")
    p.add_argument("--ts", type=float, default=None)
    _add_epoch_config(p)
    p.set_defaults(func=cmd_connect)

    p = hsub.add_parser("scenario", help="run a scripted scenario")
    p.add_argument("script", nargs="?", help="script path or bundled scenario name")
    p.add_argument("--list", action="store_true")
    p.add_argument("--check", help="expected-outcome file to compare against")
    p.set_defaults(func=cmd_scenario)

    for action in sub.choices.values():
        if action.get_default("func") in (cmd_setup, cmd_keygen, cmd_delegate, cmd_update, cmd_sign):
            action.add_argument("--binary", action="store_true", help="write raw envelopes instead of armor")
    return parser


def _fail(kind: str, code: int, message: str) -> int:
    message = " ".join(str(message).split())
    print(f"error: kind={kind} code={code} message={message}", file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except CliError as exc:
        return _fail(exc.kind, exc.code, str(exc))
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        return _fail(exc.kind, exc.code, str(exc))
    except NotCurrentEpoch as exc:
        return _fail("not-current-epoch", EXIT_USAGE, str(exc))
    except EpochError as exc:
        return _fail(type(exc).__name__, EXIT_USAGE, str(exc))
    except codec.CodecError as exc:
        return _fail(f"codec.{type(exc).__name__}", EXIT_USAGE, str(exc))
    except ValueError as exc:
        return _fail("validation", EXIT_USAGE, str(exc))
    except OSError as exc:
        return _fail("io", EXIT_IO, f"{exc.strerror or exc}: {exc.filename or ''}".strip(": "))


if __name__ == "__main__":
    sys.exit(main())
