"""Elementwise activations and their derivatives, plus the hybrid layer split."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf, expit

BASE_KINDS = ("relu", "silu", "gelu", "mish", "tanh", "sigmoid")
HYBRID_BASES = ("relu", "silu", "gelu", "mish")
_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _softplus(z):
    return np.logaddexp(0.0, z)


def activate(kind: str, z):
    z = np.asarray(z, dtype=float)
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "silu":
        return z * expit(z)
    if kind == "gelu":
        return 0.5 * z * (1.0 + erf(z / _SQRT2))
    if kind == "mish":
        return z * np.tanh(_softplus(z))
    if kind == "tanh":
        return np.tanh(z)
    if kind == "sigmoid":
        return expit(z)
    raise ValueError(f"unknown activation {kind!r}")


def activate_grad(kind: str, z):
    """d/dz of `activate`; ReLU uses 0 at the origin."""
    z = np.asarray(z, dtype=float)
    if kind == "relu":
        return (z > 0).astype(float)
    if kind == "silu":
        s = expit(z)
        return s * (1.0 + z * (1.0 - s))
    if kind == "gelu":
        return 0.5 * (1.0 + erf(z / _SQRT2)) + z * _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    if kind == "mish":
        t = np.tanh(_softplus(z))
        return t + z * (1.0 - t * t) * expit(z)
    if kind == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    if kind == "sigmoid":
        s = expit(z)
        return s * (1.0 - s)
    raise ValueError(f"unknown activation {kind!r}")


def equal_split(width: int, kinds=HYBRID_BASES) -> list[tuple[str, int]]:
    """Split ``width`` units evenly over ``kinds``, remainder to the first group."""
    base, rem = divmod(width, len(kinds))
    counts = [base + (rem if i == 0 else 0) for i in range(len(kinds))]
    return [(k, c) for k, c in zip(kinds, counts) if c > 0]


@dataclass(frozen=True)
class Activation:
    """Activation of one layer; ``hybrid`` carries ``(kind, units)`` groups."""

    kind: str
    groups: tuple[tuple[str, int], ...] = field(default=())

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind == "hybrid":
            groups = tuple((str(k).lower(), int(c)) for k, c in self.groups)
            if not groups:
                raise ValueError("hybrid activation needs at least one group")
            for k, c in groups:
                if k not in BASE_KINDS:
                    raise ValueError(f"hybrid group kind {k!r} is not a base activation")
                if c < 0:
                    raise ValueError("group sizes must be non-negative")
            object.__setattr__(self, "groups", groups)
        elif kind in BASE_KINDS:
            if self.groups:
                raise ValueError("only hybrid activations carry groups")
        else:
            raise ValueError(f"unknown activation {kind!r}")

    @classmethod
    def hybrid(cls, width: int, kinds=HYBRID_BASES) -> "Activation":
        return cls("hybrid", tuple(equal_split(width, kinds)))

    @property
    def width(self) -> int | None:
        return sum(c for _, c in self.groups) if self.groups else None

    def _slices(self, width):
        if self.kind != "hybrid":
            return [(self.kind, slice(0, width))]
        if self.width != width:
            raise ValueError(f"hybrid split covers {self.width} units, layer has {width}")
        out, start = [], 0
        for k, c in self.groups:
            out.append((k, slice(start, start + c)))
            start += c
        return out

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return self._apply(z, activate)

    def grad(self, z: np.ndarray) -> np.ndarray:
        return self._apply(z, activate_grad)

    def _apply(self, z, fn):
        if self.kind != "hybrid":
            return fn(self.kind, z)
        out = np.empty_like(z, dtype=float)
        for k, sl in self._slices(z.shape[-1]):
            out[..., sl] = fn(k, z[..., sl])
        return out

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.groups:
            d["groups"] = [[k, c] for k, c in self.groups]
        return d

    @classmethod
    def from_dict(cls, d) -> "Activation":
        if isinstance(d, str):
            return cls(d)
        return cls(d["kind"], tuple(tuple(g) for g in d.get("groups", ())))
