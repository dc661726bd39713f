"""HM-MAR model definition, validation, serialization and derived matrices.

Indexing convention: the observed series is 0-based, ``y[0], ..., y[n-1]``.
The first ``p`` values are the conditioning prefix and the latent chain
starts at index ``p``, so ``rho[h] = P(Z_p = h | y_0, ..., y_{p-1})``.
Regimes are 0-based as well.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from hmmar import _io
from hmmar.errors import InvalidModel, NonErgodicChain, UnsupportedOrder

STRUCT_TOL = 1e-12
FIXED_POINT_TOL = 1e-10

_FIELDS = ("k", "p", "coeffs", "sigmas", "transition", "rho")


def _frozen(a: ArrayLike, ndim: int) -> NDArray[np.float64]:
    arr = np.array(a, dtype=np.float64)
    if arr.ndim != ndim:
        arr = np.atleast_1d(arr) if ndim == 1 else np.atleast_2d(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class HmMarModel:
    """Parameters of an HM-MAR(K, p) model.

    Parameters
    ----------
    k, p : int
        Number of regimes and autoregressive order.
    coeffs : array_like, shape (k, p + 1)
        Row ``h`` is ``(a_0h, a_1h, ..., a_ph)``; column 0 is the intercept.
    sigmas : array_like, shape (k,)
        Per-regime noise standard deviations.
    transition : array_like, shape (k, k)
        Row-stochastic, ``transition[i, j] = P(Z_t = j | Z_{t-1} = i)``.
    rho : array_like, shape (k,)
        Law of the first latent state ``Z_p``.

    Construction never checks the probabilistic invariants; call
    :func:`validate` for a report or :meth:`check` to raise.
    """

    k: int
    p: int
    coeffs: NDArray[np.float64]
    sigmas: NDArray[np.float64]
    transition: NDArray[np.float64]
    rho: NDArray[np.float64]

    def __post_init__(self):
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "coeffs", _frozen(self.coeffs, 2))
        object.__setattr__(self, "sigmas", _frozen(self.sigmas, 1))
        object.__setattr__(self, "transition", _frozen(self.transition, 2))
        object.__setattr__(self, "rho", _frozen(self.rho, 1))

    @property
    def intercepts(self) -> NDArray[np.float64]:
        return self.coeffs[:, 0]

    @property
    def ar(self) -> NDArray[np.float64]:
        """AR coefficients, shape (k, p); column ``i`` multiplies ``y_{t-i-1}``."""
        return self.coeffs[:, 1:]

    @property
    def identical_rows(self) -> bool:
        """True when every transition row equals the first (iid latent states)."""
        return bool(np.all(self.transition == self.transition[0]))

    def check(self) -> "HmMarModel":
        report = validate(self)
        if report:
            raise InvalidModel("; ".join(str(v) for v in report), report)
        return self

    def replace(self, **changes) -> "HmMarModel":
        d = {f: getattr(self, f) for f in _FIELDS}
        d.update(changes)
        return HmMarModel(**d)

    def regime_means(self, lags: ArrayLike) -> NDArray[np.float64]:
        """Per-regime conditional means given ``lags = (y_{t-1}, ..., y_{t-p})``."""
        lags = np.asarray(lags, dtype=np.float64)
        out = self.coeffs[:, 0].copy()
        for i in range(self.p):
            out = out + self.coeffs[:, i + 1] * lags[i]
        return out

    def __eq__(self, other):
        if not isinstance(other, HmMarModel):
            return NotImplemented
        return (self.k, self.p) == (other.k, other.p) and all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in _FIELDS[2:]
        )

    __hash__ = None

    # serialization

    def to_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "p": self.p,
            "coeffs": self.coeffs.tolist(),
            "sigmas": self.sigmas.tolist(),
            "transition": self.transition.tolist(),
            "rho": self.rho.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "HmMarModel":
        if not isinstance(d, dict):
            raise InvalidModel("model document must be an object")
        unknown = sorted(set(d) - set(_FIELDS))
        if unknown:
            raise InvalidModel(f"unknown fields: {', '.join(unknown)}")
        missing = [f for f in _FIELDS if f not in d]
        if missing:
            raise InvalidModel(f"missing fields: {', '.join(missing)}")
        for f in ("k", "p"):
            if isinstance(d[f], bool) or not isinstance(d[f], int):
                raise InvalidModel(f"{f} must be an integer")
        try:
            coeffs = np.array(d["coeffs"], dtype=np.float64)
            sigmas = np.array(d["sigmas"], dtype=np.float64)
            transition = np.array(d["transition"], dtype=np.float64)
            rho = np.array(d["rho"], dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise InvalidModel(f"non-numeric or ragged array: {exc}") from exc
        return cls(d["k"], d["p"], coeffs, sigmas, transition, rho)

    def dumps(self) -> str:
        return _io.dumps(self.to_dict()) + "\n"

    @classmethod
    def loads(cls, text: str) -> "HmMarModel":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidModel(f"malformed model document: {exc}") from exc
        return cls.from_dict(d)

    def save(self, path) -> None:
        _io.atomic_write_text(path, self.dumps())

    @classmethod
    def load(cls, path) -> "HmMarModel":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def shipped_model() -> HmMarModel:
    """The two-regime AR(2) model used in the simulation study."""
    return HmMarModel.load(Path(__file__).with_name("data") / "shipped_ar2.json")


@dataclass(frozen=True)
class Violation:
    path: str
    message: str
    magnitude: float = float("nan")

    def __str__(self):
        return f"{self.path}: {self.message}"


def validate(model: HmMarModel) -> list[Violation]:
    """Return every invariant violation of ``model`` (empty if valid)."""
    out: list[Violation] = []
    k, p = model.k, model.p
    if k < 1:
        out.append(Violation("k", f"must be positive, got {k}", k))
    if p < 0:
        out.append(Violation("p", f"must be non-negative, got {p}", p))
    if out:
        return out

    if model.coeffs.shape != (k, p + 1):
        out.append(Violation("coeffs", f"shape {model.coeffs.shape} != ({k}, {p + 1})"))
    if model.sigmas.shape != (k,):
        out.append(Violation("sigmas", f"shape {model.sigmas.shape} != ({k},)"))
    if model.transition.shape != (k, k):
        out.append(Violation("transition", f"shape {model.transition.shape} != ({k}, {k})"))
    if model.rho.shape != (k,):
        out.append(Violation("rho", f"shape {model.rho.shape} != ({k},)"))
    if out:
        return out

    for name in ("coeffs", "sigmas", "transition", "rho"):
        if not np.all(np.isfinite(getattr(model, name))):
            out.append(Violation(name, "contains non-finite values"))

    for h, s in enumerate(model.sigmas):
        if not s > 0:
            out.append(Violation(f"sigmas[{h}]", f"sigma[{h}] not strictly positive", float(s)))

    P = model.transition
    for i in range(k):
        for j in range(k):
            v = P[i, j]
            if v < 0 or v > 1:
                out.append(Violation(f"transition[{i}][{j}]", f"entry {float(v)!r} outside [0, 1]", float(v)))
        s = float(P[i].sum())
        if abs(s - 1.0) > STRUCT_TOL:
            out.append(Violation(f"transition[{i}]", f"row {i} sums to {s:.12g}", abs(s - 1.0)))

    for h, v in enumerate(model.rho):
        if v < 0 or v > 1:
            out.append(Violation(f"rho[{h}]", f"entry {float(v)!r} outside [0, 1]", float(v)))
    s = float(model.rho.sum())
    if abs(s - 1.0) > STRUCT_TOL:
        out.append(Violation("rho", f"rho sums to {s:.12g}", abs(s - 1.0)))
    return out


def _is_primitive(adj: NDArray[np.bool_]) -> bool:
    """Irreducible and aperiodic: some power of ``adj`` is all-positive.

    Wielandt's bound (m-1)^2 + 1 on the exponent makes the loop finite.
    """
    m = adj.shape[0]
    a = adj.astype(np.int64)
    reach = a.copy()
    for _ in range((m - 1) ** 2 + 1):
        if np.all(reach > 0):
            return True
        reach = np.minimum(reach @ a, 1)
    return bool(np.all(reach > 0))


def stationary_distribution(transition: ArrayLike) -> NDArray[np.float64]:
    """Invariant probability vector ``mu`` with ``mu @ P == mu``.

    Solves ``(P' - I) mu = 0`` with the last equation replaced by
    ``sum(mu) = 1``.

    Raises
    ------
    NonErgodicChain
        If the invariant measure is not unique (singular system) or the
        recurrent class is periodic, so iterates do not converge to it.
    """
    P = np.asarray(transition, dtype=np.float64)
    k = P.shape[0]
    A = P.T - np.eye(k)
    A[-1, :] = 1.0
    b = np.zeros(k)
    b[-1] = 1.0
    try:
        if np.linalg.cond(A) > 1e12:
            raise np.linalg.LinAlgError("ill-conditioned")
        mu = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NonErgodicChain("transition matrix has no unique invariant measure") from exc
    mu = np.where(np.abs(mu) < 1e-15, 0.0, mu)
    if np.any(mu < -1e-10):
        raise NonErgodicChain("invariant vector has negative entries")
    mu = np.clip(mu, 0.0, None)
    mu = mu / mu.sum()
    support = mu > 0
    if not _is_primitive(P[np.ix_(support, support)] > 0):
        raise NonErgodicChain("recurrent class is periodic")
    return mu


def spectral_radius(M: ArrayLike) -> float:
    """Largest eigenvalue modulus of a dense (generally unsymmetric) matrix."""
    ev = np.linalg.eigvals(np.asarray(M, dtype=np.float64))
    return float(np.max(np.abs(ev))) if ev.size else 0.0


@dataclass(frozen=True, eq=False)
class DerivedMatrices:
    """Diagonal coefficient matrices and chain quantities of an HM-MAR(K, 1).

    ``phi0``, ``phi1``, ``phi1_abs`` and ``sigma_diag`` are ``None`` when the
    model order is not 1.
    """

    transition: NDArray[np.float64]
    mu: NDArray[np.float64]
    phi0: NDArray[np.float64] | None = None
    phi1: NDArray[np.float64] | None = None
    phi1_abs: NDArray[np.float64] | None = None
    sigma_diag: NDArray[np.float64] | None = None
    lam: float | None = None


def derive_matrices(model: HmMarModel, require_order_one: bool = False) -> DerivedMatrices:
    """Build ``phi0``, ``phi1``, ``|phi1|``, ``sigma``, ``mu`` and ``lambda``.

    ``lambda`` is ``max_k sum_j P[k, j] a_1j^2``, the largest conditional
    second moment of the lag-1 coefficient given the previous regime.
    """
    model.check()
    mu = stationary_distribution(model.transition)
    if model.p != 1:
        if require_order_one:
            raise UnsupportedOrder(f"stability matrices need p = 1, got p = {model.p}")
        return DerivedMatrices(transition=model.transition, mu=mu)
    a0 = model.coeffs[:, 0]
    a1 = model.coeffs[:, 1]
    lam = float(np.max(model.transition @ (a1 * a1)))
    return DerivedMatrices(
        transition=model.transition,
        mu=mu,
        phi0=np.diag(a0),
        phi1=np.diag(a1),
        phi1_abs=np.diag(np.abs(a1)),
        sigma_diag=np.diag(model.sigmas),
        lam=lam,
    )
