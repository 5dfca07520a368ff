"""Gadget library for building the statement circuits.

Values inside a circuit are sparse linear combinations over wires, so
additions and constant scaling are free; only multiplications allocate
wires and constraints.  The hash gadgets replay the exact computation of
``hashing`` and the fixed-point multiply replays ``field.fx_mul`` via a
sign bit, an absolute-value split, and quotient/remainder range checks.
"""

from __future__ import annotations

from .field import ScaleConfig, fx_encode
from .hashing import HashConfig, empty_root, round_constants
from .r1cs import ConstraintSystem, LinComb, WitnessSynthesisError

DEFAULT_QUOTIENT_BITS = 120


def lc_const(v: int) -> LinComb:
    return {0: v} if v else {}


def lc_wire(w: int) -> LinComb:
    return {w: 1}


class CircuitBuilder:
    def __init__(
        self,
        cs: ConstraintSystem,
        scale: ScaleConfig,
        hash_cfg: HashConfig,
        quotient_bits: int = DEFAULT_QUOTIENT_BITS,
    ):
        if hash_cfg.modulus != scale.modulus:
            raise ValueError("hash and scale configs disagree on the field")
        self.cs = cs
        self.scale = scale
        self.hash_cfg = hash_cfg
        self.quotient_bits = quotient_bits
        # (prod_wire, sigma_wire) pairs: sigma is unconstrained when the
        # witness product is exactly zero (both signs encode zero).
        self.sign_wires: list[tuple[int, int]] = []
        # (presence_product_wire, inverse_wire) pairs: the inverse is
        # unconstrained when the presence product is zero.
        self.inverse_wires: list[tuple[int, int]] = []

    # -- linear-combination arithmetic (free) --------------------------------

    def add(self, a: LinComb, b: LinComb) -> LinComb:
        p = self.cs.modulus
        out = dict(a)
        for w, c in b.items():
            v = (out.get(w, 0) + c) % p
            if v:
                out[w] = v
            else:
                out.pop(w, None)
        return out

    def sub(self, a: LinComb, b: LinComb) -> LinComb:
        return self.add(a, self.scaled(b, -1))

    def scaled(self, a: LinComb, k: int) -> LinComb:
        p = self.cs.modulus
        k %= p
        return {w: c * k % p for w, c in a.items()} if k else {}

    # -- core wire allocation -------------------------------------------------

    def hinted(self, hint, name=None) -> int:
        return self.cs.alloc_private(name=name, hint=hint)

    def mul(self, a: LinComb, b: LinComb) -> LinComb:
        """Plain field product as a new constrained wire."""
        cs = self.cs
        w = self.hinted(lambda vs, a=a, b=b: cs.lc_value(a, vs) * cs.lc_value(b, vs))
        cs.enforce(a, b, lc_wire(w))
        return lc_wire(w)

    def enforce_eq(self, a: LinComb, b: LinComb) -> None:
        self.cs.enforce(self.sub(a, b), lc_const(1), {})

    def enforce_boolean(self, a: LinComb) -> None:
        self.cs.enforce(a, self.sub(lc_const(1), a), {})

    def bits(self, a: LinComb, width: int) -> list[int]:
        """Bit-decompose a into ``width`` boolean wires; synthesis fails if
        the value does not fit."""
        cs = self.cs

        def bit_hint(i):
            def hint(vs, a=a, i=i, width=width):
                v = cs.lc_value(a, vs)
                if v >> width:
                    raise WitnessSynthesisError(
                        f"value {v} exceeds {width}-bit range check"
                    )
                return (v >> i) & 1

            return hint

        wires = [self.hinted(bit_hint(i)) for i in range(width)]
        recomposed: LinComb = {}
        for i, w in enumerate(wires):
            self.enforce_boolean(lc_wire(w))
            recomposed = self.add(recomposed, self.scaled(lc_wire(w), 1 << i))
        self.enforce_eq(recomposed, a)
        return wires

    def select(self, sel: LinComb, a: LinComb, b: LinComb) -> LinComb:
        """sel * a + (1 - sel) * b for boolean sel, costing one product."""
        return self.add(b, self.mul(sel, self.sub(a, b)))

    # -- fixed-point multiply ----------------------------------------------------

    def fx_mul(self, a: LinComb, b: LinComb) -> LinComb:
        """Rescaled product: allocates sign, |product|, quotient and
        remainder, enforcing prod = (1-2*sigma)*abs, abs = q*gamma + r,
        r < 2^ceil(log2 gamma), q < 2^quotient_bits.  Returns the signed
        encoding of the quotient."""
        cs = self.cs
        p = cs.modulus
        gamma = self.scale.gamma
        half = self.scale.half

        prod = self.mul(a, b)
        prod_w = next(iter(prod))

        def signed(vs):
            v = vs[prod_w]
            return v if v <= half else v - p

        sigma = self.hinted(lambda vs: 1 if signed(vs) < 0 else 0)
        self.enforce_boolean(lc_wire(sigma))
        self.sign_wires.append((prod_w, sigma))

        absval = self.hinted(lambda vs: abs(signed(vs)))
        one_minus_2s = self.sub(lc_const(1), self.scaled(lc_wire(sigma), 2))
        cs.enforce(one_minus_2s, prod, lc_wire(absval))

        q = self.hinted(lambda vs: vs[absval] // gamma)
        r = self.hinted(lambda vs: vs[absval] % gamma)
        cs.enforce(lc_wire(q), lc_const(gamma), self.sub(lc_wire(absval), lc_wire(r)))
        self.bits(lc_wire(r), self.scale.remainder_bits)
        self.bits(lc_wire(q), self.quotient_bits)

        out = self.hinted(
            lambda vs: (-vs[q] if vs[sigma] else vs[q]) % p
        )
        cs.enforce(one_minus_2s, lc_wire(q), lc_wire(out))
        return lc_wire(out)

    # -- hash gadgets ---------------------------------------------------------

    def mimc_permute(self, x: LinComb, key: LinComb) -> LinComb:
        p = self.cs.modulus
        t = x
        for c in round_constants(p, self.hash_cfg.rounds):
            u = self.add(self.add(t, key), lc_const(c))
            u2 = self.mul(u, u)
            u4 = self.mul(u2, u2)
            t = self.mul(u4, u)
        return self.add(t, key)

    def _compress(self, key: LinComb, msg: LinComb) -> LinComb:
        return self.add(self.add(self.mimc_permute(msg, key), key), msg)

    def hash1(self, v: LinComb) -> LinComb:
        return self._compress(lc_const(self.hash_cfg.tag_leaf), v)

    def hash2(self, l: LinComb, r: LinComb) -> LinComb:
        return self._compress(self.add(l, lc_const(self.hash_cfg.tag_node)), r)

    def hash_data_point(self, uid: LinComb, x: list[LinComb], y: LinComb) -> LinComb:
        h = self.hash1(uid)
        for xj in x:
            h = self.hash2(h, self.hash1(xj))
        return self.hash2(h, self.hash1(y))

    def hash_model(self, weights: list[LinComb]) -> LinComb:
        h = self.hash1(weights[0])
        for w in weights[1:]:
            h = self.hash2(h, self.hash1(w))
        return h

    def merkle_root(self, leaves: list[LinComb], presence: list[LinComb]) -> LinComb:
        """Root of the level-by-level tree over the present prefix of a
        fixed-capacity leaf list.

        Each level hashes every adjacent pair unconditionally (static
        shape), then selects per slot between the pair hash, the odd
        carried node, and absence, driven by the presence bits.  The
        surviving slot-0 value equals the dynamic-length tree root.
        """
        empty = lc_const(empty_root(self.hash_cfg))
        nodes, pres = list(leaves), list(presence)
        while len(nodes) > 1:
            nxt_nodes, nxt_pres = [], []
            for j in range(0, len(nodes), 2):
                if j + 1 == len(nodes):
                    nxt_nodes.append(nodes[j])
                    nxt_pres.append(pres[j])
                    continue
                h = self.hash2(nodes[j], nodes[j + 1])
                # both present -> pair hash; lone left node -> carried up.
                paired = self.mul(pres[j + 1], self.sub(h, nodes[j]))
                nxt_nodes.append(self.add(nodes[j], paired))
                nxt_pres.append(pres[j])
            nodes, pres = nxt_nodes, nxt_pres
        if not nodes:
            return empty
        return self.add(empty, self.mul(pres[0], self.sub(nodes[0], empty)))

    def chain_root(
        self, base: LinComb, items: list[LinComb], presence: list[LinComb]
    ) -> LinComb:
        """Append-only chain fold over the present prefix, starting at base."""
        psi = base
        for item, pres in zip(items, presence):
            h = self.hash2(psi, item)
            psi = self.add(psi, self.mul(pres, self.sub(h, psi)))
        return psi

    def prefix_presence(self, presence: list[LinComb]) -> None:
        """Boolean presence bits forming a prefix: present slots precede
        absent ones."""
        for b in presence:
            self.enforce_boolean(b)
        for prev, nxt in zip(presence, presence[1:]):
            self.cs.enforce(nxt, self.sub(lc_const(1), prev), {})

    def inverse_pair(self, diff: LinComb, active: LinComb) -> None:
        """Enforce diff != 0 whenever the boolean product ``active`` is 1,
        via an inverse witness: diff * v = active."""
        cs = self.cs
        active_w = next(iter(active)) if len(active) == 1 and 0 not in active else None

        def hint(vs, diff=diff, active=active):
            m = cs.lc_value(active, vs)
            d = cs.lc_value(diff, vs)
            if m == 0:
                return 0
            if d == 0:
                raise WitnessSynthesisError(
                    "training and unlearnt sets intersect"
                )
            return pow(d, -1, cs.modulus)

        v = self.hinted(hint)
        cs.enforce(diff, lc_wire(v), active)
        if active_w is not None:
            self.inverse_wires.append((active_w, v))


class CircuitOps:
    """The training/field ops interface over circuit linear combinations."""

    def __init__(self, builder: CircuitBuilder):
        self.b = builder

    def const(self, encoded: int) -> LinComb:
        return lc_const(encoded % self.b.cs.modulus)

    def add(self, a: LinComb, b: LinComb) -> LinComb:
        return self.b.add(a, b)

    def sub(self, a: LinComb, b: LinComb) -> LinComb:
        return self.b.sub(a, b)

    def mul(self, a: LinComb, b: LinComb) -> LinComb:
        return self.b.fx_mul(a, b)

    def encode(self, r) -> LinComb:
        return lc_const(fx_encode(r, self.b.scale))
