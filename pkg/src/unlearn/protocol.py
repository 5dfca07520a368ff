"""Server/user state machines: Init, ProveUpdate/VerifyUpdate,
ProveUnlearn/VerifyUnlearn, with request batching and validity enforcement.

The server's commitment at iteration i is the triple (h_m, h_D, h_U):
hashed model, training-set tree root, and unlearnt-set chain root.  Users
verify every iteration's update proof against the previous commitment and
check unlearning proofs against the commitment of the iteration the point
was deleted in (or any later one).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field as dc_field, replace

from .circuits import DataCircuit, DataShape, ModelCircuit, ModelShape
from .field import ConfigError
from .gadgets import DEFAULT_QUOTIENT_BITS
from .hashing import (
    DataPoint,
    HashConfig,
    MembershipPath,
    compute_tree_path,
    hash_data,
    hash_data_point,
    hash_model_weights,
    hash_unlearn,
    verify_tree_path,
)
from .proofsys import ProofBlob, RelationHandle, SetupArtifacts, get_backend
from .training import Dataset, ModelParams, TrainConfig, train_model

INIT_MARKER = "empty"


class ReAddAfterDelete(ValueError):
    """A deleted uid can never be added again."""


class DuplicateAdd(ValueError):
    """The same point cannot be added twice."""


class ShapeOverflow(RuntimeError):
    """The update exceeds the compiled circuit capacity; re-run setup with
    a larger shape."""


@dataclass(frozen=True)
class ProtocolConfig:
    train: TrainConfig
    capacity: int
    unlearn_capacity: int
    backend: str = "witness-check"
    hash_cfg: HashConfig = dc_field(default_factory=HashConfig)
    quotient_bits: int = DEFAULT_QUOTIENT_BITS

    def __post_init__(self) -> None:
        if self.capacity < 1 or self.unlearn_capacity < 1:
            raise ConfigError("capacities must be positive")
        if self.hash_cfg.modulus != self.train.scale.modulus:
            raise ConfigError("hash and training configs disagree on the field")


@dataclass(frozen=True)
class Commitment:
    h_m: int
    h_d: int
    h_u: int


@dataclass(frozen=True)
class UpdateProof:
    model_proof: ProofBlob
    data_proof: ProofBlob

    @property
    def model_statement(self) -> tuple[int, ...]:
        return self.model_proof.public_inputs

    @property
    def data_statement(self) -> tuple[int, ...]:
        return self.data_proof.public_inputs


@dataclass(frozen=True)
class UnlearnProof:
    path: MembershipPath
    iteration: int
    uid: int


@dataclass
class PublicParams:
    config: ProtocolConfig
    model_circuit: ModelCircuit
    data_circuit: DataCircuit
    model_relation: RelationHandle
    data_relation: RelationHandle
    model_setup: SetupArtifacts
    data_setup: SetupArtifacts
    backend: object

    @property
    def scale(self):
        return self.config.train.scale

    @property
    def hash_cfg(self) -> HashConfig:
        return self.config.hash_cfg

    def empty_model(self) -> ModelParams:
        """Distinguished sentinel model hashed into com_0; its single
        weight is a tagged constant no training run can produce."""
        digest = hashlib.sha256(b"unlearn.tag.empty-model").digest()
        weight = int.from_bytes(digest, "big") % self.hash_cfg.modulus
        return ModelParams(kind="empty", arity=0, weights=(weight,))

    def commit_dataset(self, dataset: Dataset) -> int:
        """Commit(pub, D): deterministic training-set root."""
        digests = [hash_data_point(d, self.hash_cfg) for d in dataset.points]
        return hash_data(digests, self.hash_cfg)


def global_setup(config: ProtocolConfig, backend=None, setup_store=None) -> PublicParams:
    """Build both circuits for the configured shape and run the proving
    setup for each.  ``setup_store`` (see ``serialize.SetupStore``) caches
    artifacts by circuit fingerprint across processes."""
    model_circuit = ModelCircuit(
        ModelShape(
            train=config.train,
            capacity=config.capacity,
            hash_cfg=config.hash_cfg,
            quotient_bits=config.quotient_bits,
        )
    )
    data_circuit = DataCircuit(
        DataShape(
            data_capacity=config.capacity,
            unlearn_capacity=config.unlearn_capacity,
            add_capacity=config.unlearn_capacity,
            hash_cfg=config.hash_cfg,
            modulus=config.train.scale.modulus,
        )
    )
    backend = backend or get_backend(config.backend)
    model_rel = RelationHandle.of(model_circuit.cs)
    data_rel = RelationHandle.of(data_circuit.cs)

    def setup_for(rel):
        if setup_store is not None:
            cached = setup_store.load(backend.name, rel.fingerprint)
            if cached is not None:
                return cached
        artifacts = backend.setup(rel)
        if setup_store is not None:
            setup_store.save(artifacts)
        return artifacts

    return PublicParams(
        config=config,
        model_circuit=model_circuit,
        data_circuit=data_circuit,
        model_relation=model_rel,
        data_relation=data_rel,
        model_setup=setup_for(model_rel),
        data_setup=setup_for(data_rel),
        backend=backend,
    )


@dataclass
class ServerState:
    """st_S: the training set, both hashed sets, the current chain root,
    the deployed model, and the pending request batches."""

    iteration: int
    dataset: Dataset
    hashed_data: tuple[int, ...]
    hashed_unlearnt: tuple[int, ...]
    unlearnt_root: int
    model: ModelParams
    deleted_uids: frozenset[int]
    pending_add: tuple[DataPoint, ...] = ()
    pending_delete: tuple[DataPoint, ...] = ()
    # Points unlearnt by the most recent update, kept until the next one so
    # their unlearning proofs can be produced without re-supplying the data.
    last_deleted: tuple[DataPoint, ...] = ()


def server_init(pub: PublicParams) -> tuple[ServerState, Commitment, str]:
    cfg = pub.hash_cfg
    empty_model = pub.empty_model()
    state = ServerState(
        iteration=0,
        dataset=Dataset((), pub.config.train.arity),
        hashed_data=(),
        hashed_unlearnt=(),
        unlearnt_root=hash_unlearn((), cfg),
        model=empty_model,
        deleted_uids=frozenset(),
    )
    com = Commitment(
        h_m=hash_model_weights(empty_model.weights, cfg),
        h_d=hash_data((), cfg),
        h_u=hash_unlearn((), cfg),
    )
    return state, com, INIT_MARKER


def verify_init(pub: PublicParams, com: Commitment, marker: str) -> bool:
    cfg = pub.hash_cfg
    return (
        marker == INIT_MARKER
        and com.h_m == hash_model_weights(pub.empty_model().weights, cfg)
        and com.h_d == hash_data((), cfg)
        and com.h_u == hash_unlearn((), cfg)
    )


def queue_add(state: ServerState, d: DataPoint) -> ServerState:
    if len(d.x) != state.dataset.arity:
        raise ValueError(f"point arity {len(d.x)} != dataset arity {state.dataset.arity}")
    banned = state.deleted_uids | {p.uid for p in state.pending_delete}
    if d.uid in banned:
        raise ReAddAfterDelete(f"uid {d.uid} was deleted and cannot be re-added")
    present = {p.uid for p in state.dataset.points} | {p.uid for p in state.pending_add}
    if d.uid in present:
        raise DuplicateAdd(f"uid {d.uid} is already in the training set")
    return replace(state, pending_add=state.pending_add + (d,))


def queue_delete(state: ServerState, d: DataPoint) -> ServerState:
    # Idempotent: a point already unlearnt (or queued) is left alone.
    if d.uid in state.deleted_uids or any(p.uid == d.uid for p in state.pending_delete):
        return state
    return replace(state, pending_delete=state.pending_delete + (d,))


def prove_update(
    state: ServerState, pub: PublicParams
) -> tuple[ServerState, ModelParams, Commitment, UpdateProof]:
    cfg = pub.hash_cfg
    removed = set(state.pending_delete)
    points = [d for d in state.dataset.points if d not in removed]
    points += [d for d in state.pending_add if d not in removed]
    if len(points) > pub.config.capacity:
        raise ShapeOverflow(
            f"{len(points)} points exceed the compiled capacity {pub.config.capacity}"
        )
    new_unlearnt = [hash_data_point(d, cfg) for d in state.pending_delete]
    hashed_unlearnt = state.hashed_unlearnt + tuple(new_unlearnt)
    if len(new_unlearnt) > pub.config.unlearn_capacity or len(
        hashed_unlearnt
    ) > pub.config.unlearn_capacity:
        raise ShapeOverflow(
            f"{len(hashed_unlearnt)} unlearnt digests exceed the compiled "
            f"capacity {pub.config.unlearn_capacity}"
        )

    dataset = Dataset(tuple(points), pub.config.train.arity)
    hashed_data = tuple(hash_data_point(d, cfg) for d in dataset.points)
    model = train_model(dataset, pub.config.train)
    com = Commitment(
        h_m=hash_model_weights(model.weights, cfg),
        h_d=hash_data(hashed_data, cfg),
        h_u=hash_unlearn(hashed_unlearnt, cfg),
    )

    model_witness = pub.model_circuit.synthesize(dataset)
    model_statement = (com.h_m, com.h_d)
    model_proof = pub.backend.prove(
        pub.model_relation, pub.model_setup, model_statement, model_witness
    )
    data_witness = pub.data_circuit.synthesize(
        hashed_data, state.hashed_unlearnt, new_unlearnt
    )
    data_statement = (com.h_d, state.unlearnt_root, com.h_u)
    data_proof = pub.backend.prove(
        pub.data_relation, pub.data_setup, data_statement, data_witness
    )

    new_state = ServerState(
        iteration=state.iteration + 1,
        dataset=dataset,
        hashed_data=hashed_data,
        hashed_unlearnt=hashed_unlearnt,
        unlearnt_root=com.h_u,
        model=model,
        deleted_uids=state.deleted_uids | {d.uid for d in state.pending_delete},
        last_deleted=state.pending_delete,
    )
    return new_state, model, com, UpdateProof(model_proof, data_proof)


def verify_update(
    pub: PublicParams, com_prev: Commitment, com: Commitment, proof: UpdateProof
) -> bool:
    if proof.model_statement != (com.h_m, com.h_d):
        return False
    if proof.data_statement != (com.h_d, com_prev.h_u, com.h_u):
        return False
    return pub.backend.verify(
        pub.model_relation, pub.model_setup, proof.model_statement, proof.model_proof
    ) and pub.backend.verify(
        pub.data_relation, pub.data_setup, proof.data_statement, proof.data_proof
    )


def prove_unlearn(pub: PublicParams, state: ServerState, d: DataPoint) -> UnlearnProof:
    path = compute_tree_path(d, state.hashed_unlearnt, pub.hash_cfg)
    return UnlearnProof(path=path, iteration=state.iteration, uid=d.uid)


def verify_unlearn(
    pub: PublicParams, d: DataPoint, com: Commitment, proof: UnlearnProof
) -> bool:
    return verify_tree_path(d, com.h_u, proof.path, pub.hash_cfg)
