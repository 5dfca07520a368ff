"""Proving-system interface: Setup / Prove / Verify over R1CS relations.

Two interchangeable backends:

* ``witness-check`` — development backend.  Proofs embed the full witness
  and verification re-evaluates every constraint.  Not succinct and not
  hiding, but exact and dependency-free; completeness and circuit-level
  tests run on it.  A deliberately broken variant (``check=False``) that
  accepts anything is available to the security harness as a negative
  control.

* ``snark`` — sound succinct backend: Groth16 over BN254 via the bundled
  ``unlearn-groth16`` helper binary (arkworks).  The trusted setup runs
  in-process per circuit shape and its trapdoor is never materialized
  outside the helper, which discards it on exit.
"""

from __future__ import annotations

import atexit
import json
import os
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .r1cs import ConstraintSystem, Witness

HELPER_ENV = "UNLEARN_GROTH16_BIN"
HELPER_NAME = "unlearn-groth16"


class ProofSysError(RuntimeError):
    pass


class BackendUnavailable(ProofSysError):
    pass


class UnsatisfiedWitness(ProofSysError):
    """Honest provers refuse to prove false statements."""


class FingerprintMismatch(ProofSysError):
    """Setup artifacts belong to a different circuit."""


@dataclass(frozen=True)
class RelationHandle:
    circuit: ConstraintSystem
    fingerprint: str

    @classmethod
    def of(cls, circuit: ConstraintSystem) -> "RelationHandle":
        return cls(circuit, circuit.fingerprint())


@dataclass(frozen=True)
class SetupArtifacts:
    """Proving/verifying parameters.  The serialization schema has no
    trapdoor field by construction."""

    backend: str
    fingerprint: str
    proving_params: bytes = b""
    verifying_params: bytes = b""


@dataclass(frozen=True)
class ProofBlob:
    backend: str
    fingerprint: str
    public_inputs: tuple[int, ...]
    proof_bytes: bytes

    def __post_init__(self) -> None:
        object.__setattr__(self, "public_inputs", tuple(self.public_inputs))


def _check_fingerprint(rel: RelationHandle, sp: SetupArtifacts) -> None:
    if sp.fingerprint != rel.fingerprint:
        raise FingerprintMismatch(
            f"artifacts for {sp.fingerprint[:12]} used with circuit {rel.fingerprint[:12]}"
        )


class WitnessCheckBackend:
    def __init__(self, check: bool = True):
        self.check = check
        self.name = "witness-check" if check else "witness-check-unchecked"

    def setup(self, rel: RelationHandle) -> SetupArtifacts:
        return SetupArtifacts(backend=self.name, fingerprint=rel.fingerprint)

    def prove(
        self,
        rel: RelationHandle,
        sp: SetupArtifacts,
        statement: Sequence[int],
        witness: Witness,
    ) -> ProofBlob:
        _check_fingerprint(rel, sp)
        cs = rel.circuit
        publics = tuple(witness.values[1 : 1 + cs.num_public])
        if tuple(statement) != publics or not cs.is_satisfied(witness):
            raise UnsatisfiedWitness("witness does not satisfy the statement")
        payload = json.dumps(
            {"v": 1, "wires": [f"{v:x}" for v in witness.values]},
            separators=(",", ":"),
        ).encode()
        return ProofBlob(self.name, rel.fingerprint, tuple(statement), payload)

    def verify(
        self,
        rel: RelationHandle,
        sp: SetupArtifacts,
        statement: Sequence[int],
        blob: ProofBlob,
    ) -> bool:
        _check_fingerprint(rel, sp)
        if blob.fingerprint != rel.fingerprint:
            return False
        if blob.public_inputs != tuple(statement):
            return False
        if not self.check:
            return True
        cs = rel.circuit
        try:
            payload = json.loads(blob.proof_bytes)
            values = [int(v, 16) for v in payload["wires"]]
            if payload.get("v") != 1:
                return False
        except (ValueError, KeyError, TypeError):
            return False
        if len(values) != cs.num_wires or any(not 0 <= v < cs.modulus for v in values):
            return False
        witness = Witness(tuple(values))
        if tuple(values[1 : 1 + cs.num_public]) != tuple(statement):
            return False
        return cs.is_satisfied(witness)


def find_helper() -> Optional[str]:
    env = os.environ.get(HELPER_ENV)
    if env and Path(env).is_file():
        return env
    on_path = shutil.which(HELPER_NAME)
    if on_path:
        return on_path
    # Repo-relative fallback for editable installs.
    root = Path(__file__).resolve().parents[2]
    candidate = root / "native" / "groth16" / "target" / "release" / HELPER_NAME
    if candidate.is_file():
        return str(candidate)
    return None


def snark_available() -> bool:
    return find_helper() is not None


def _write_values(path: Path, header: str, values: Sequence[int]) -> None:
    lines = [header, f"values {len(values)}"]
    lines += [f"{v:x}" for v in values]
    path.write_text("\n".join(lines) + "\n")


class Groth16Backend:
    name = "snark"

    def __init__(self, seed: Optional[int] = None):
        self.seed = seed
        self._r1cs_cache: dict[str, Path] = {}
        self._workdir: Optional[Path] = None

    def _helper(self) -> str:
        helper = find_helper()
        if helper is None:
            raise BackendUnavailable(
                f"{HELPER_NAME} binary not found; build native/groth16 "
                f"(cargo build --release) or set ${HELPER_ENV}"
            )
        return helper

    def _run(self, *args: str) -> subprocess.CompletedProcess:
        proc = subprocess.run(
            [self._helper(), *args], capture_output=True, text=True
        )
        if proc.returncode == 2:
            raise ProofSysError(f"groth16 helper error: {proc.stderr.strip()}")
        return proc

    def _work(self) -> Path:
        if self._workdir is None:
            work = tempfile.mkdtemp(prefix="unlearn-groth16-")
            atexit.register(shutil.rmtree, work, ignore_errors=True)
            self._workdir = Path(work)
        return self._workdir

    def _r1cs_path(self, rel: RelationHandle) -> Path:
        path = self._r1cs_cache.get(rel.fingerprint)
        if path is None or not path.exists():
            path = self._work() / f"{rel.fingerprint}.r1cs"
            path.write_bytes(rel.circuit.export())
            self._r1cs_cache[rel.fingerprint] = path
        return path

    def setup(self, rel: RelationHandle) -> SetupArtifacts:
        work = self._work()
        pk = work / f"{rel.fingerprint}.pk"
        vk = work / f"{rel.fingerprint}.vk"
        args = ["setup", "--r1cs", str(self._r1cs_path(rel)), "--pk", str(pk), "--vk", str(vk)]
        if self.seed is not None:
            args += ["--seed", str(self.seed)]
        proc = self._run(*args)
        if proc.returncode != 0:
            raise ProofSysError(f"setup failed: {proc.stderr.strip()}")
        return SetupArtifacts(
            backend=self.name,
            fingerprint=rel.fingerprint,
            proving_params=pk.read_bytes(),
            verifying_params=vk.read_bytes(),
        )

    def prove(
        self,
        rel: RelationHandle,
        sp: SetupArtifacts,
        statement: Sequence[int],
        witness: Witness,
    ) -> ProofBlob:
        _check_fingerprint(rel, sp)
        cs = rel.circuit
        publics = tuple(witness.values[1 : 1 + cs.num_public])
        if tuple(statement) != publics or not cs.is_satisfied(witness):
            raise UnsatisfiedWitness("witness does not satisfy the statement")
        work = self._work()
        with tempfile.TemporaryDirectory(dir=work) as tmp:
            tmp = Path(tmp)
            pk = work / f"{sp.fingerprint}.pk"
            if not pk.exists():
                pk.write_bytes(sp.proving_params)
            wit = tmp / "witness"
            _write_values(wit, "unlearn-wit v1", witness.values)
            proof = tmp / "proof"
            proc = self._run(
                "prove",
                "--r1cs", str(self._r1cs_path(rel)),
                "--pk", str(pk),
                "--witness", str(wit),
                "--proof", str(proof),
            )
            if proc.returncode != 0:
                raise ProofSysError(f"prove failed: {proc.stderr.strip()}")
            return ProofBlob(self.name, rel.fingerprint, tuple(statement), proof.read_bytes())

    def verify(
        self,
        rel: RelationHandle,
        sp: SetupArtifacts,
        statement: Sequence[int],
        blob: ProofBlob,
    ) -> bool:
        _check_fingerprint(rel, sp)
        if blob.fingerprint != rel.fingerprint or blob.public_inputs != tuple(statement):
            return False
        with tempfile.TemporaryDirectory() as tmp:
            tmp = Path(tmp)
            vk = tmp / "vk"
            vk.write_bytes(sp.verifying_params)
            pub = tmp / "publics"
            _write_values(pub, "unlearn-pub v1", list(statement))
            proof = tmp / "proof"
            proof.write_bytes(blob.proof_bytes)
            proc = self._run(
                "verify", "--vk", str(vk), "--publics", str(pub), "--proof", str(proof)
            )
            return proc.returncode == 0

    def verify_many(
        self,
        rel: RelationHandle,
        sp: SetupArtifacts,
        statement: Sequence[int],
        proofs: Sequence[bytes],
    ) -> list[bool]:
        """Verify many proof blobs against one statement in a single helper
        call (used by the tamper-resistance smoke tests)."""
        _check_fingerprint(rel, sp)
        with tempfile.TemporaryDirectory() as tmp:
            tmp = Path(tmp)
            vk = tmp / "vk"
            vk.write_bytes(sp.verifying_params)
            pub = tmp / "publics"
            _write_values(pub, "unlearn-pub v1", list(statement))
            blobs = tmp / "proofs"
            blobs.write_text("\n".join(p.hex() for p in proofs) + "\n")
            proc = self._run(
                "verify-batch", "--vk", str(vk), "--publics", str(pub), "--proofs", str(blobs)
            )
            if proc.returncode != 0:
                raise ProofSysError(f"verify-batch failed: {proc.stderr.strip()}")
            return [line.strip() == "OK" for line in proc.stdout.splitlines() if line.strip()]


_BACKENDS = {
    "witness-check": WitnessCheckBackend,
    "snark": Groth16Backend,
}


def get_backend(name: str, **kwargs):
    try:
        factory = _BACKENDS[name]
    except KeyError:
        raise BackendUnavailable(f"unknown backend {name!r}") from None
    return factory(**kwargs)
