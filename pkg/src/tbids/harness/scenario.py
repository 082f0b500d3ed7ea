"""Scripted, deterministic runs of keyserver, edge and client on a virtual clock.

Script format, one action per line (``#`` starts a comment)::

    <action> <tick> [key=value ...]

Actions and their arguments:

    config           epochs=16 window=1 epoch_length=60 id=a/b   (tick 0, first line only)
    tick             run one keyserver step
    connect          skew=<epochs> window=<w> id=<levels>
    kill-edge        stop the edge listener (held keys survive)
    start-edge       restart it on the same port
    skew-clock       epochs=<k>   persistent client clock offset
    edge-mode        mode=honest|stale
    crash-keyserver  at=after-queue|after-update   step, crash there, restart from disk

At tick ``T`` every role's clock reads the middle of epoch ``T``; a client
additionally adds its skew in whole epochs. The whole script is validated
before anything runs.
"""

from __future__ import annotations

import asyncio
import secrets
import shlex
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from .. import codec, group, storage
from ..epochs import EpochConfig
from ..timebound import FS, fs_gen, setup
from . import keyserver as ks
from .client import client_connect
from .edge import Edge
from .wire import PskAuthenticator

T0 = 1_700_000_000

_ARGS = {
    "config": {"epochs", "window", "epoch_length", "id"},
    "tick": set(),
    "connect": {"skew", "window", "id"},
    "kill-edge": set(),
    "start-edge": set(),
    "skew-clock": {"epochs"},
    "edge-mode": {"mode"},
    "crash-keyserver": {"at"},
}
_INT_ARGS = {"epochs", "window", "epoch_length", "skew"}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Action:
    line: int
    name: str
    tick: int
    args: Dict[str, Union[int, str]] = field(default_factory=dict)


@dataclass(frozen=True)
class ScenarioConfig:
    epochs: int = 16
    window: int = 1
    epoch_length: int = 60
    identity: Tuple[bytes, ...] = (b"example.com",)


def _parse_identity(text: str) -> Tuple[bytes, ...]:
    levels = tuple(part.encode() for part in text.split("/"))
    if not all(levels):
        raise ValueError(f"empty identity level in {text!r}")
    return levels


def parse(text: str) -> Tuple[ScenarioConfig, List[Action]]:
    actions: List[Action] = []
    cfg = ScenarioConfig()
    last_tick = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        words = shlex.split(raw, comments=True)
        if not words:
            continue
        name, *rest = words

        def fail(msg: str) -> ScenarioError:
            return ScenarioError(f"line {lineno}: {msg}")

        if name not in _ARGS:
            raise fail(f"unknown action {name!r}")
        if not rest:
            raise fail("missing tick")
        try:
            tick = int(rest[0])
        except ValueError:
            raise fail(f"tick {rest[0]!r} is not an integer") from None
        if tick < 0:
            raise fail("tick must be non-negative")
        if tick < last_tick:
            raise fail(f"tick {tick} goes back in time (previous {last_tick})")
        last_tick = tick
        args: Dict[str, Union[int, str]] = {}
        for item in rest[1:]:
            key, sep, value = item.partition("=")
            if not sep or key not in _ARGS[name]:
                raise fail(f"unexpected argument {item!r} for {name}")
            if key in _INT_ARGS:
                try:
                    args[key] = int(value)
                except ValueError:
                    raise fail(f"{key} must be an integer") from None
            else:
                args[key] = value
        if name == "config":
            if actions or tick != 0:
                raise fail("config must be the first action, at tick 0")
            try:
                cfg = ScenarioConfig(
                    epochs=int(args.get("epochs", cfg.epochs)),
                    window=int(args.get("window", cfg.window)),
                    epoch_length=int(args.get("epoch_length", cfg.epoch_length)),
                    identity=_parse_identity(str(args["id"])) if "id" in args else cfg.identity,
                )
            except ValueError as exc:
                raise fail(str(exc)) from None
            continue
        if name == "edge-mode" and args.get("mode") not in ("honest", "stale"):
            raise fail("mode must be honest or stale")
        if name == "crash-keyserver" and args.get("at") not in ks.CRASH_POINTS:
            raise fail(f"at must be one of {', '.join(ks.CRASH_POINTS)}")
        if name == "skew-clock" and "epochs" not in args:
            raise fail("skew-clock needs epochs=")
        if "id" in args:
            try:
                _parse_identity(str(args["id"]))
            except ValueError as exc:
                raise fail(str(exc)) from None
        actions.append(Action(lineno, name, tick, args))
    n = cfg.epochs
    if n < 2 or n & (n - 1):
        raise ScenarioError("config: epochs must be a power of two >= 2")
    if cfg.window < 0 or cfg.epoch_length <= 0:
        raise ScenarioError("config: window must be >= 0 and epoch_length > 0")
    for action in actions:
        if action.tick >= n:
            raise ScenarioError(f"line {action.line}: tick {action.tick} is past the last epoch {n - 1}")
    return cfg, actions


class _Clock:
    def __init__(self, cfg: EpochConfig):
        self.cfg = cfg
        self.tick = 0

    def __call__(self) -> float:
        return self.cfg.epoch_start(self.tick) + self.cfg.epoch_length // 2


def _fmt(values) -> str:
    return ",".join(str(v) for v in values) or "-"


class _Run:
    def __init__(self, cfg: ScenarioConfig, workdir: Path, rng: group.Rng):
        self.cfg = cfg
        self.epoch_cfg = EpochConfig(t0=T0, epoch_length=cfg.epoch_length, window=cfg.window)
        self.clock = _Clock(self.epoch_cfg)
        self.rng = rng
        self.skew = 0
        self.params = setup(cfg.epochs, rng, identity_levels=len(cfg.identity))
        self.pk, state = fs_gen(self.params, rng)
        self.state_path = workdir / "origin.state"
        storage.atomic_write(self.state_path, codec.dump(state))
        self.auth = PskAuthenticator(secrets.token_bytes(32))
        self.edge = Edge(codec.point_bytes(self.pk), self.auth, self.epoch_cfg, clock=self.clock, rng=rng)
        self.address: Optional[Tuple[str, int]] = None
        self.keyserver: Optional[ks.Keyserver] = None
        self.persisted_epoch = state.current_epoch

    def _new_keyserver(self) -> ks.Keyserver:
        push = ks.TcpPusher(self.address, self.auth, timeout=2.0)
        return ks.Keyserver(
            self.state_path, self.cfg.identity, push, self.epoch_cfg,
            clock=self.clock, rng=self.rng, retries=2, backoff=0.005, max_backoff=0.02,
        )

    def _check_monotonic(self) -> int:
        epoch = codec.load(self.state_path.read_bytes(), codec.Kind.FS_STATE).current_epoch
        if epoch < self.persisted_epoch:
            raise AssertionError(f"persisted epoch went back from {self.persisted_epoch} to {epoch}")
        self.persisted_epoch = epoch
        return epoch

    async def start(self) -> None:
        self.address = await self.edge.start("127.0.0.1", 0)
        self.keyserver = self._new_keyserver()

    async def stop(self) -> None:
        await self.edge.stop()

    async def do(self, action: Action) -> str:
        self.clock.tick = action.tick
        head = f"tick={action.tick} action={action.name}"
        a = action.args
        if action.name == "tick":
            result = await self.keyserver.step()
            state_epoch = self._check_monotonic()
            return (
                f"{head} pushed={_fmt(result.pushed)} pending={_fmt(result.pending)} "
                f"state_epoch={state_epoch} edge_epochs={_fmt(self.edge.held_epochs())}"
            )
        if action.name == "crash-keyserver":
            self.keyserver.crash_at = str(a["at"])
            try:
                await self.keyserver.step()
                outcome = "no-crash"
            except ks.SimulatedCrash:
                outcome = "crashed"
            self.keyserver = self._new_keyserver()  # restart from what is on disk
            state_epoch = self._check_monotonic()
            return (
                f"{head} at={a['at']} outcome={outcome} state_epoch={state_epoch} "
                f"pending={_fmt(self.keyserver.pending_epochs())}"
            )
        if action.name == "connect":
            skew = self.skew + int(a.get("skew", 0))
            identity = _parse_identity(str(a["id"])) if "id" in a else self.cfg.identity
            now = self.clock() + skew * self.cfg.epoch_length
            report = await client_connect(
                self.address, identity, self.params, self.pk, self.epoch_cfg,
                now=now, scheme=FS, window=int(a.get("window", self.cfg.window)), timeout=2.0,
            )
            return f"{head} skew={skew} {report.line()}"
        if action.name == "kill-edge":
            await self.edge.stop()
            return head
        if action.name == "start-edge":
            if not self.edge.running:
                await self.edge.start(*self.address)
            return head
        if action.name == "skew-clock":
            self.skew = int(a["epochs"])
            return f"{head} epochs={self.skew}"
        if action.name == "edge-mode":
            self.edge.mode = str(a["mode"])
            return f"{head} mode={self.edge.mode}"
        raise AssertionError(action.name)


async def run_async(text: str, rng: Optional[group.Rng] = None) -> List[str]:
    cfg, actions = parse(text)
    with tempfile.TemporaryDirectory(prefix="tbids-scenario-") as tmp:
        run = _Run(cfg, Path(tmp), rng or group.system_rng())
        await run.start()
        try:
            lines = [
                f"tick=0 action=config epochs={cfg.epochs} window={cfg.window} "
                f"epoch_length={cfg.epoch_length} id={'/'.join(l.decode() for l in cfg.identity)}"
            ]
            for action in actions:
                lines.append(await run.do(action))
        finally:
            await run.stop()
    return lines


def scenario_run(script: Union[str, Path], rng: Optional[group.Rng] = None) -> List[str]:
    """Run a script file (or a bundled scenario name) and return its report lines."""
    return asyncio.run(run_async(read_script(script), rng))


def bundled_names() -> List[str]:
    root = resources.files(__package__) / "scenarios"
    return sorted(p.name[: -len(".scn")] for p in root.iterdir() if p.name.endswith(".scn"))


def bundled_path(name: str, suffix: str = ".scn"):
    return resources.files(__package__) / "scenarios" / f"{name}{suffix}"


def read_script(script: Union[str, Path]) -> str:
    path = Path(script)
    if path.exists():
        return path.read_text()
    if isinstance(script, str) and script in bundled_names():
        return bundled_path(script).read_text()
    raise ScenarioError(f"no such scenario: {script}")


def expected_lines(name: str) -> List[str]:
    return bundled_path(name, ".expected").read_text().splitlines()
