"""Operator command line: protocol driving, proof files, games, benchmarks.

State lives in a directory of versioned JSON envelopes (see ``serialize``):
``pub/`` holds the protocol parameters and cached setup artifacts,
``commitments/`` and ``proofs/`` the per-iteration outputs, and
``state.json`` the server state.  Files are the wire format: a verifier
needs only ``pub/``, the commitments, and the proof files.

Exit codes: 0 success/accept, 1 reject, 2 usage error, 3 corrupt state.
"""

from __future__ import annotations

import argparse
import fcntl
import json
import sys
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path

from .bench import DEFAULT_SIZES, bench_sizes
from .field import ConfigError, ScaleConfig, fx_encode
from .game import builtin_strategies, run_suite
from .hashing import DataPoint, HashConfig, NotMemberError
from .ingest import SchemaError, ingest_csv, split_dataset
from .gadgets import DEFAULT_QUOTIENT_BITS
from .proofsys import BackendUnavailable, WitnessCheckBackend
from .protocol import (
    DuplicateAdd,
    ProtocolConfig,
    ReAddAfterDelete,
    ShapeOverflow,
    global_setup,
    prove_unlearn,
    prove_update,
    queue_add,
    queue_delete,
    server_init,
    verify_init,
    verify_unlearn,
    verify_update,
)
from .serialize import (
    EnvelopeError,
    StateDir,
    atomic_write_json,
    commitment_from_dict,
    commitment_to_dict,
    read_json,
    unlearn_proof_from_dict,
    unlearn_proof_to_dict,
    update_proof_from_dict,
    update_proof_to_dict,
)
from .training import accuracy, default_init_values, train_model, TrainConfig

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_USAGE = 2
EXIT_CORRUPT = 3

CONFIG_DEFAULTS = {
    "kind": "linear",
    "hidden": "0",
    "arity": "1",
    "epochs": "10",
    "learning_rate": "0.1",
    "gamma": "100000",
    "capacity": "8",
    "unlearn_capacity": "8",
    "backend": "witness-check",
    "hash_rounds": "110",
    "quotient_bits": str(DEFAULT_QUOTIENT_BITS),
    "split": "0.8",
}


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat key = value lines; '#' starts a comment."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key = value")
        key, val = (part.strip() for part in line.split("=", 1))
        values[key] = val
    return values


def build_protocol_config(options: dict[str, str]) -> ProtocolConfig:
    opts = dict(CONFIG_DEFAULTS)
    unknown = set(options) - set(CONFIG_DEFAULTS)
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(sorted(unknown))}")
    opts.update(options)
    try:
        scale = ScaleConfig(gamma=int(opts["gamma"]))
        split = float(opts["split"])
        if not 0 < split < 1:
            raise CliError("split must be in (0, 1)")
        kind = opts["kind"]
        hidden = int(opts["hidden"])
        arity = int(opts["arity"])
        train = TrainConfig(
            kind=kind,
            arity=arity,
            hidden=hidden,
            epochs=int(opts["epochs"]),
            learning_rate=fx_encode(Fraction(opts["learning_rate"]), scale),
            init_values=default_init_values(kind, arity, hidden, scale),
            scale=scale,
        )
        return ProtocolConfig(
            train=train,
            capacity=int(opts["capacity"]),
            unlearn_capacity=int(opts["unlearn_capacity"]),
            backend=opts["backend"],
            hash_cfg=HashConfig(modulus=scale.modulus, rounds=int(opts["hash_rounds"])),
            quotient_bits=int(opts["quotient_bits"]),
        )
    except (ValueError, ConfigError) as e:
        raise CliError(f"bad configuration: {e}") from e


@contextmanager
def dir_lock(store: StateDir):
    store.root.mkdir(parents=True, exist_ok=True)
    with open(store.lock_file, "w") as fh:
        try:
            fcntl.flock(fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            raise CliError(f"another command holds {store.lock_file}", EXIT_CORRUPT)
        yield


def load_pub(store: StateDir):
    try:
        return store.load_public_params()
    except FileNotFoundError:
        raise CliError(f"{store.root} is not initialized (run setup first)")
    except (EnvelopeError, json.JSONDecodeError, KeyError) as e:
        raise CliError(f"corrupt parameters: {e}", EXIT_CORRUPT)


def load_state(store: StateDir, scale):
    try:
        return store.load_state(scale)
    except FileNotFoundError:
        raise CliError("no server state (run init first)")
    except (EnvelopeError, json.JSONDecodeError, KeyError, ValueError) as e:
        raise CliError(f"corrupt state: {e}", EXIT_CORRUPT)


def emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=1, sort_keys=True))
    else:
        print(text)


# -- commands -----------------------------------------------------------------


def cmd_setup(args) -> int:
    store = StateDir(args.dir)
    options = parse_config_file(args.config) if args.config else {}
    if args.backend:
        options["backend"] = args.backend
    config = build_protocol_config(options)
    with dir_lock(store):
        pub = global_setup(config, setup_store=store.setup_store)
        store.save_config(config)
    emit(
        args,
        {
            "dir": str(store.root),
            "backend": config.backend,
            "model_fingerprint": pub.model_relation.fingerprint,
            "data_fingerprint": pub.data_relation.fingerprint,
            "model_constraints": pub.model_circuit.cs.stats().constraint_count,
            "data_constraints": pub.data_circuit.cs.stats().constraint_count,
        },
        f"setup complete in {store.root} (backend {config.backend})",
    )
    return EXIT_OK


def cmd_init(args) -> int:
    store = StateDir(args.dir)
    pub = load_pub(store)
    with dir_lock(store):
        state, com, marker = server_init(pub)
        atomic_write_json(store.commitment_file(0), commitment_to_dict(com, pub.scale))
        atomic_write_json(store.init_marker_file, {"version": 1, "marker": marker})
        store.save_state(state, pub.scale)
    emit(args, {"iteration": 0, "commitment": commitment_to_dict(com, pub.scale)},
         "initialized: com_0 written")
    return EXIT_OK


def _point_from_args(args, pub) -> DataPoint:
    if args.features is None or args.uid is None or args.label is None:
        raise CliError("add needs --dataset or all of --uid/--features/--label")
    scale = pub.scale
    feats = tuple(fx_encode(Fraction(v), scale) for v in args.features.split(","))
    return DataPoint(uid=args.uid, x=feats, y=fx_encode(Fraction(args.label), scale))


def cmd_add(args) -> int:
    store = StateDir(args.dir)
    pub = load_pub(store)
    with dir_lock(store):
        state = load_state(store, pub.scale)
        if args.dataset:
            try:
                ingested = ingest_csv(args.dataset, pub.scale)
            except (SchemaError, ValueError) as e:
                raise CliError(f"cannot ingest {args.dataset}: {e}")
            points = ingested.dataset.points
        else:
            points = (_point_from_args(args, pub),)
        try:
            for d in points:
                state = queue_add(state, d)
        except (ReAddAfterDelete, DuplicateAdd, ValueError) as e:
            raise CliError(str(e), EXIT_REJECT)
        store.save_state(state, pub.scale)
    emit(args, {"queued_add": len(points)}, f"queued {len(points)} addition(s)")
    return EXIT_OK


def cmd_delete(args) -> int:
    store = StateDir(args.dir)
    pub = load_pub(store)
    if args.uid is None:
        raise CliError("delete needs --uid")
    with dir_lock(store):
        state = load_state(store, pub.scale)
        pool = list(state.dataset.points) + list(state.pending_add)
        point = next((d for d in pool if d.uid == args.uid), None)
        if point is None and args.dataset:
            ingested = ingest_csv(args.dataset, pub.scale)
            point = next((d for d in ingested.dataset.points if d.uid == args.uid), None)
        if point is None:
            raise CliError(
                f"uid {args.uid} not found; pass --dataset with the point's row"
            )
        state = queue_delete(state, point)
        store.save_state(state, pub.scale)
    emit(args, {"queued_delete": args.uid}, f"queued deletion of uid {args.uid}")
    return EXIT_OK


def cmd_update(args) -> int:
    store = StateDir(args.dir)
    pub = load_pub(store)
    with dir_lock(store):
        state = load_state(store, pub.scale)
        try:
            state, model, com, proof = prove_update(state, pub)
        except ShapeOverflow as e:
            raise CliError(str(e), EXIT_REJECT)
        i = state.iteration
        atomic_write_json(store.commitment_file(i), commitment_to_dict(com, pub.scale))
        atomic_write_json(store.update_proof_file(i), update_proof_to_dict(proof, pub.scale))
        # state.json last: it is the commit point for the update.
        store.save_state(state, pub.scale)
    emit(
        args,
        {
            "iteration": i,
            "dataset_size": len(state.dataset.points),
            "unlearnt_size": len(state.hashed_unlearnt),
            "commitment": commitment_to_dict(com, pub.scale),
        },
        f"iteration {i}: |D|={len(state.dataset.points)}, "
        f"|U|={len(state.hashed_unlearnt)}; proofs written",
    )
    return EXIT_OK


def cmd_verify_update(args) -> int:
    store = StateDir(args.dir)
    pub = load_pub(store)
    i = args.iteration
    if i is None:
        raise CliError("verify-update needs --iteration")
    try:
        if i == 0:
            com0 = commitment_from_dict(read_json(store.commitment_file(0)), pub.scale)
            marker = read_json(store.init_marker_file)["marker"]
            ok = verify_init(pub, com0, marker)
        else:
            com_prev = commitment_from_dict(
                read_json(store.commitment_file(i - 1)), pub.scale
            )
            com = commitment_from_dict(read_json(store.commitment_file(i)), pub.scale)
            proof = update_proof_from_dict(read_json(store.update_proof_file(i)), pub.scale)
            ok = verify_update(pub, com_prev, com, proof)
    except FileNotFoundError as e:
        raise CliError(f"missing envelope: {e.filename}")
    except (EnvelopeError, json.JSONDecodeError, KeyError, ValueError) as e:
        raise CliError(f"corrupt envelope: {e}", EXIT_CORRUPT)
    emit(args, {"iteration": i, "accepted": ok},
         f"iteration {i}: {'accept' if ok else 'REJECT'}")
    return EXIT_OK if ok else EXIT_REJECT


def cmd_prove_unlearn(args) -> int:
    store = StateDir(args.dir)
    pub = load_pub(store)
    if args.uid is None:
        raise CliError("prove-unlearn needs --uid")
    with dir_lock(store):
        state = load_state(store, pub.scale)
        point = next((d for d in state.last_deleted if d.uid == args.uid), None)
        if point is None and args.dataset:
            ingested = ingest_csv(args.dataset, pub.scale)
            point = next((d for d in ingested.dataset.points if d.uid == args.uid), None)
        if point is None:
            raise CliError(
                f"uid {args.uid} is not among the last update's deletions; "
                "pass --dataset with the point's row"
            )
        try:
            proof = prove_unlearn(pub, state, point)
        except NotMemberError as e:
            raise CliError(str(e), EXIT_REJECT)
        path = store.unlearn_proof_file(proof.iteration, args.uid)
        atomic_write_json(path, unlearn_proof_to_dict(proof, pub.scale))
    emit(args, {"iteration": proof.iteration, "uid": args.uid, "file": str(path)},
         f"unlearning proof for uid {args.uid} written ({path.name})")
    return EXIT_OK


def cmd_verify_unlearn(args) -> int:
    store = StateDir(args.dir)
    pub = load_pub(store)
    if args.uid is None or args.iteration is None:
        raise CliError("verify-unlearn needs --uid and --iteration")
    if not args.dataset:
        raise CliError("verify-unlearn needs --dataset with the point's row "
                       "(the verifying user supplies their own data point)")
    try:
        ingested = ingest_csv(args.dataset, pub.scale)
    except (SchemaError, ValueError) as e:
        raise CliError(f"cannot ingest {args.dataset}: {e}")
    point = next((d for d in ingested.dataset.points if d.uid == args.uid), None)
    if point is None:
        raise CliError(f"uid {args.uid} not present in {args.dataset}")
    try:
        com = commitment_from_dict(
            read_json(store.commitment_file(args.iteration)), pub.scale
        )
        proof = unlearn_proof_from_dict(
            read_json(store.unlearn_proof_file(args.iteration, args.uid)), pub.scale
        )
    except FileNotFoundError as e:
        raise CliError(f"missing envelope: {e.filename}")
    except (EnvelopeError, json.JSONDecodeError, KeyError, ValueError) as e:
        raise CliError(f"corrupt envelope: {e}", EXIT_CORRUPT)
    ok = verify_unlearn(pub, point, com, proof)
    detail = "" if ok else " (path mismatch: recomputed root differs from commitment)"
    emit(args, {"iteration": args.iteration, "uid": args.uid, "accepted": ok},
         f"unlearning of uid {args.uid} at iteration {args.iteration}: "
         f"{'accept' if ok else 'REJECT'}{detail}")
    return EXIT_OK if ok else EXIT_REJECT


def cmd_game(args) -> int:
    store = StateDir(args.dir)
    pub = load_pub(store)
    if pub.config.capacity < 4:
        raise CliError("the game needs a capacity >= 4 setup")
    strategies = builtin_strategies()
    if args.strategy:
        strategies = [s for s in strategies if s.name == args.strategy]
        if not strategies:
            names = ", ".join(s.name for s in builtin_strategies())
            raise CliError(f"unknown strategy {args.strategy!r} (choose from {names})")
    if args.negative_control:
        pub = global_setup(pub.config, backend=WitnessCheckBackend(check=False),
                           setup_store=None)
    seeds = list(range(args.seeds))
    reports = run_suite(pub, seeds, strategies)
    wins = [r for r in reports if r.verdict == 1]
    payload = {"reports": [r.to_dict() for r in reports], "wins": len(wins)}
    if args.json:
        print(json.dumps(payload, indent=1))
    else:
        for r in reports:
            print(f"{r.strategy:26s} seed={r.seed} verdict={r.verdict} "
                  f"failing={r.failing_check}")
    if args.negative_control:
        return EXIT_OK if wins else EXIT_REJECT
    return EXIT_OK if not wins else EXIT_REJECT


def cmd_bench(args) -> int:
    if args.dir and StateDir(args.dir).params_file.exists():
        store = StateDir(args.dir)
        config = store.load_config()
    else:
        options = parse_config_file(args.config) if args.config else {}
        if args.backend:
            options["backend"] = args.backend
        config = build_protocol_config(options)
    sizes = (
        tuple(int(s) for s in args.sizes.split(","))
        if args.sizes
        else DEFAULT_SIZES + ((1000,) if args.full else ())
    )
    entries = bench_sizes(
        sizes,
        config.train,
        config.hash_cfg,
        config.quotient_bits,
        backend_name=config.backend,
        prove=not args.counts_only,
    )
    payload = {"backend": config.backend, "entries": [e.to_dict() for e in entries]}

    if args.dataset:
        scale = config.train.scale
        ingested = ingest_csv(args.dataset, scale)
        split = float(args.split) if args.split else 0.8
        train_set, test_set = split_dataset(ingested.dataset, split)
        train_cfg = TrainConfig(
            kind=config.train.kind,
            arity=ingested.dataset.arity,
            hidden=config.train.hidden,
            epochs=config.train.epochs,
            learning_rate=config.train.learning_rate,
            init_values=default_init_values(
                config.train.kind, ingested.dataset.arity, config.train.hidden, scale
            ),
            scale=scale,
        )
        model = train_model(train_set, train_cfg)
        threshold = fx_encode(Fraction(1, 2), scale)
        payload["accuracy"] = {
            "train": float(accuracy(model, train_set, threshold, scale)),
            "test": float(accuracy(model, test_set, threshold, scale)),
            "split": split,
        }

    if args.json:
        print(json.dumps(payload, indent=1))
    else:
        for e in entries:
            t = e.timings
            line = (
                f"|D|={e.size:5d} |U|={e.unlearn_size:4d} "
                f"model_constraints={e.model_constraints:9d} "
                f"data_constraints={e.data_constraints:8d}"
            )
            if "model_prove_s" in t:
                line += (
                    f" prove={t['model_prove_s'] + t['data_prove_s']:7.2f}s"
                    f" verify={t['model_verify_s'] + t['data_verify_s']:6.3f}s"
                )
            print(line)
        if "accuracy" in payload:
            acc = payload["accuracy"]
            print(f"accuracy: train={acc['train']:.3f} test={acc['test']:.3f} "
                  f"(split {acc['split']:.2f})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="unlearn",
        description="Auditable machine unlearning with verifiable retraining",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dir_required=True):
        p.add_argument("--dir", required=dir_required, help="state directory")
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--backend", choices=["witness-check", "snark"])
        p.add_argument("--dataset", help="CSV file")
        p.add_argument("--uid", type=int)
        p.add_argument("--iteration", type=int)
        p.add_argument("--json", action="store_true", help="machine-readable output")

    for name, fn in [
        ("setup", cmd_setup),
        ("init", cmd_init),
        ("add", cmd_add),
        ("delete", cmd_delete),
        ("update", cmd_update),
        ("verify-update", cmd_verify_update),
        ("prove-unlearn", cmd_prove_unlearn),
        ("verify-unlearn", cmd_verify_unlearn),
        ("game", cmd_game),
        ("bench", cmd_bench),
    ]:
        p = sub.add_parser(name)
        common(p, dir_required=name not in ("bench",))
        p.set_defaults(fn=fn)
        if name == "add":
            p.add_argument("--features", help="comma-separated decimal features")
            p.add_argument("--label", help="decimal label")
        if name == "game":
            p.add_argument("--strategy", help="run a single builtin strategy")
            p.add_argument("--seeds", type=int, default=5)
            p.add_argument(
                "--negative-control",
                action="store_true",
                help="remove proof-system soundness; expect a strategy to win",
            )
        if name == "bench":
            p.add_argument("--sizes", help="comma-separated dataset sizes")
            p.add_argument("--full", action="store_true", help="include |D|=1000")
            p.add_argument("--counts-only", action="store_true",
                           help="skip proving, report constraint counts")
            p.add_argument("--split", help="train/test split ratio")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except BackendUnavailable as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CORRUPT


if __name__ == "__main__":
    sys.exit(main())
