"""Geometric bucket grid over the value range [vmin, vmax]."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from majorsel.core import Number, ValidationError, compare, dump_number, is_exact


@dataclass(frozen=True)
class BucketGrid:
    """Buckets [eta^k vmin, eta^(k+1) vmin) for k = 0..K-1, the last one
    closed at vmax.  ``K`` is the smallest positive integer with eta^K >= V."""

    eta: Number
    K: int
    vmin: Number
    vmax: Number

    def lower(self, k: int) -> Number:
        return self.vmin * self.eta**k

    def upper(self, k: int) -> Number:
        return self.vmin * self.eta ** (k + 1)

    def bucket_of(self, x: Number) -> int:
        if compare(x, self.vmin) < 0 or compare(x, self.vmax) > 0:
            raise ValidationError(f"{x} outside the grid range")
        for k in range(self.K - 1):
            if compare(x, self.upper(k)) < 0:
                return k
        return self.K - 1

    def to_doc(self) -> dict:
        return {
            "eta": dump_number(self.eta),
            "K": self.K,
            "vmin": dump_number(self.vmin),
            "vmax": dump_number(self.vmax),
        }


def make_grid(vmin: Number, vmax: Number, epsilon: Number) -> BucketGrid:
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    if not vmin > 0:
        raise ValidationError("a bucket grid needs vmin > 0")
    exact = is_exact(vmin, vmax, epsilon)
    eta = 1 + (Fraction(epsilon) if exact else float(epsilon))
    V = vmax / vmin
    K, reach = 1, eta
    while compare(reach, V) < 0:
        K += 1
        reach *= eta
    return BucketGrid(eta, K, vmin, vmax)


def instance_grid(instance, epsilon: Number) -> BucketGrid:
    return make_grid(instance.vmin, instance.vmax, epsilon)
