"""Network topologies and channel realizations for downlink NOMA HetNets.

One macro base station (index 0) plus optional small cells, each serving its
own fixed set of single-antenna users, with passive eavesdroppers scattered in
the macro cell.  Channel gains are squared magnitudes: path loss d^-alpha
times an exponential (Rayleigh power) fading draw, per (base station, node,
subcarrier) triple.  Eavesdropper channels come in a true table and an
estimated table whose elementwise error is bounded by ``epsilon``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

# distances are clamped below this (meters) so gains stay finite
_D_MIN = 1e-2
# floor for truncating perturbed gain estimates
_GAIN_FLOOR = 1e-12


class SchemaError(ValueError):
    """Raised when an instance file is malformed; carries the offending field."""

    def __init__(self, field_name: str, message: str):
        self.field_name = field_name
        super().__init__(f"{field_name}: {message}")


def db_to_watts(db: float) -> float:
    """Convert a dB-relative-to-1-W power level to watts."""
    return float(10.0 ** (db / 10.0))


def _default_p_max(n_bs: int) -> tuple[float, ...]:
    # 16 dB macro budget, 6 dB per small cell, read as dB re 1 W
    return (db_to_watts(16.0),) + (db_to_watts(6.0),) * (n_bs - 1)


@dataclass(frozen=True)
class NetworkConfig:
    """Topology, channel and budget parameters for one network draw.

    ``F`` base stations (index 0 is the macro BS), ``M_f[f]`` users served by
    BS f, ``E`` eavesdroppers, ``N`` subcarriers, at most ``ell`` users per
    subcarrier per BS.  ``p_max`` is the per-BS power budget in watts,
    ``sigma2`` the per-subcarrier noise power in watts, ``epsilon`` the bound
    on the squared-gain estimation error for eavesdropper channels.
    """

    F: int = 2
    M_f: tuple[int, ...] = (3, 3)
    E: int = 2
    N: int = 2
    ell: int = 2
    p_max: tuple[float, ...] | None = None
    sigma2: float = 1e-13
    alpha: float = 4.0
    r_mbs: float = 1500.0
    r_sbs: float = 15.0
    epsilon: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.F < 1:
            raise ValueError("F must be >= 1")
        m = tuple(int(v) for v in self.M_f)
        if len(m) != self.F or any(v < 1 for v in m):
            raise ValueError("M_f must list one positive user count per BS")
        object.__setattr__(self, "M_f", m)
        if self.E < 0:
            raise ValueError("E must be >= 0")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not (1 <= self.ell <= max(m)):
            raise ValueError("ell must satisfy 1 <= ell <= max(M_f)")
        p = self.p_max if self.p_max is not None else _default_p_max(self.F)
        p = tuple(float(v) for v in p)
        if len(p) != self.F or any(v <= 0 for v in p):
            raise ValueError("p_max must list one positive budget per BS")
        object.__setattr__(self, "p_max", p)
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be > 0")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.r_mbs <= 0 or self.r_sbs <= 0:
            raise ValueError("coverage radii must be > 0")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")

    @property
    def M(self) -> int:
        """Total user count across all base stations."""
        return sum(self.M_f)

    def to_dict(self) -> dict:
        return {
            "F": self.F,
            "M_f": list(self.M_f),
            "E": self.E,
            "N": self.N,
            "ell": self.ell,
            "p_max": list(self.p_max),
            "sigma2": self.sigma2,
            "alpha": self.alpha,
            "r_mbs": self.r_mbs,
            "r_sbs": self.r_sbs,
            "epsilon": self.epsilon,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise SchemaError(sorted(extra)[0], "unknown config field")
        kwargs = dict(d)
        for key in ("M_f", "p_max"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise SchemaError("config", str(exc)) from exc


@dataclass
class NetworkInstance:
    """One realized network: positions plus squared channel gains.

    ``g_user[f, m, n]`` is the squared gain from BS f to (global) user m on
    subcarrier n; ``serving[m]`` maps each user to its serving BS.
    ``g_eave_true``/``g_eave_est`` are the true and estimated eavesdropper
    tables, shaped (F, E, N).  Instances are immutable by convention: no
    method mutates the arrays after construction.
    """

    config: NetworkConfig
    g_user: np.ndarray
    g_eave_true: np.ndarray
    g_eave_est: np.ndarray
    serving: np.ndarray
    pos_bs: np.ndarray
    pos_user: np.ndarray
    pos_eave: np.ndarray

    def __post_init__(self):
        c = self.config
        self.g_user = np.asarray(self.g_user, dtype=float)
        self.g_eave_true = np.asarray(self.g_eave_true, dtype=float)
        self.g_eave_est = np.asarray(self.g_eave_est, dtype=float)
        self.serving = np.asarray(self.serving, dtype=int)
        self.pos_bs = np.asarray(self.pos_bs, dtype=float)
        self.pos_user = np.asarray(self.pos_user, dtype=float)
        self.pos_eave = np.asarray(self.pos_eave, dtype=float).reshape(c.E, 2)
        _check_shape("g_user", self.g_user, (c.F, c.M, c.N))
        _check_shape("g_eave_true", self.g_eave_true, (c.F, c.E, c.N))
        _check_shape("g_eave_est", self.g_eave_est, (c.F, c.E, c.N))
        _check_shape("serving", self.serving, (c.M,))
        _check_shape("pos_bs", self.pos_bs, (c.F, 2))
        _check_shape("pos_user", self.pos_user, (c.M, 2))
        for name, arr in (
            ("g_user", self.g_user),
            ("g_eave_true", self.g_eave_true),
            ("g_eave_est", self.g_eave_est),
        ):
            if not np.all(np.isfinite(arr)):
                raise SchemaError(name, "gains must be finite")
            if np.any(arr <= 0):
                raise SchemaError(name, "gains must be > 0")
        expected = np.repeat(np.arange(c.F), c.M_f)
        if not np.array_equal(self.serving, expected):
            raise SchemaError("serving", "users must be grouped by serving BS")
        err = np.abs(self.g_eave_true - self.g_eave_est)
        if c.E and err.size and err.max() > c.epsilon + 1e-12:
            raise SchemaError("g_eave_est", "estimation error exceeds epsilon")

    def __eq__(self, other) -> bool:
        if not isinstance(other, NetworkInstance):
            return NotImplemented
        return self.config == other.config and all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in (
                "g_user",
                "g_eave_true",
                "g_eave_est",
                "serving",
                "pos_bs",
                "pos_user",
                "pos_eave",
            )
        )

    @property
    def users_of(self) -> list[np.ndarray]:
        """Global user indices served by each BS."""
        out, start = [], 0
        for mf in self.config.M_f:
            out.append(np.arange(start, start + mf))
            start += mf
        return out


def _check_shape(name: str, arr: np.ndarray, shape: tuple) -> None:
    if arr.shape != shape:
        raise SchemaError(name, f"expected shape {shape}, got {arr.shape}")


def gain_from_geometry(distance: float | np.ndarray, alpha: float,
                       fading: float | np.ndarray = 1.0) -> np.ndarray:
    """Squared channel gain: clamped-distance path loss times power fading."""
    d = np.maximum(np.asarray(distance, dtype=float), _D_MIN)
    return d ** (-alpha) * fading


def _uniform_disc(rng: np.random.Generator, center: np.ndarray, radius: float,
                  n: int = 1) -> np.ndarray:
    r = radius * np.sqrt(rng.uniform(size=n))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return center + np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def generate(config: NetworkConfig) -> NetworkInstance:
    """Draw a reproducible network realization for ``config``.

    Per-node child RNG streams (keyed by node kind and index) make instances
    nest across sweeps: growing E, M_f or N extends an instance without
    redrawing what smaller configs already contain, which keeps paired-seed
    comparisons low-variance.
    """
    c = config
    root = np.random.SeedSequence(c.seed)
    key_bs, key_user, key_eave = root.spawn(3)

    pos_bs = np.zeros((c.F, 2))
    for f in range(1, c.F):
        rng = np.random.default_rng(key_bs.spawn(f + 1)[-1])
        pos_bs[f] = _uniform_disc(rng, np.zeros(2), c.r_mbs)[0]

    serving = np.repeat(np.arange(c.F), c.M_f)
    pos_user = np.zeros((c.M, 2))
    g_user = np.zeros((c.F, c.M, c.N))
    for m in range(c.M):
        rng = np.random.default_rng(key_user.spawn(m + 1)[-1])
        f = serving[m]
        radius = c.r_mbs if f == 0 else c.r_sbs
        pos_user[m] = _uniform_disc(rng, pos_bs[f], radius)[0]
        d = np.linalg.norm(pos_user[m] - pos_bs, axis=1)
        fading = rng.exponential(1.0, size=(c.N, c.F)).T
        g_user[:, m, :] = gain_from_geometry(d[:, None], c.alpha, fading)

    pos_eave = np.zeros((c.E, 2))
    g_true = np.zeros((c.F, c.E, c.N))
    g_est = np.zeros((c.F, c.E, c.N))
    for e in range(c.E):
        rng = np.random.default_rng(key_eave.spawn(e + 1)[-1])
        pos_eave[e] = _uniform_disc(rng, np.zeros(2), c.r_mbs)[0]
        d = np.linalg.norm(pos_eave[e] - pos_bs, axis=1)
        fading = rng.exponential(1.0, size=(c.N, c.F)).T
        g_true[:, e, :] = gain_from_geometry(d[:, None], c.alpha, fading)
        err = rng.uniform(-c.epsilon, c.epsilon, size=(c.N, c.F)).T
        g_est[:, e, :] = np.maximum(g_true[:, e, :] + err, _GAIN_FLOOR)

    return NetworkInstance(
        config=c,
        g_user=g_user,
        g_eave_true=g_true,
        g_eave_est=g_est,
        serving=serving,
        pos_bs=pos_bs,
        pos_user=pos_user,
        pos_eave=pos_eave,
    )


_ARRAY_FIELDS = ("pos_bs", "pos_user", "pos_eave", "g_user", "g_eave_true",
                 "g_eave_est")


def serialize(inst: NetworkInstance) -> str:
    """Render an instance to deterministic JSON text (full float precision)."""
    doc = {
        "config": inst.config.to_dict(),
        "positions": {
            "bs": inst.pos_bs.tolist(),
            "users": inst.pos_user.tolist(),
            "eaves": inst.pos_eave.tolist(),
        },
        "g_user": inst.g_user.tolist(),
        "g_eave_true": inst.g_eave_true.tolist(),
        "g_eave_est": inst.g_eave_est.tolist(),
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def save(inst: NetworkInstance, path) -> None:
    """Write an instance file; load(save(x)) == x bit-exactly."""
    with open(path, "w") as fh:
        fh.write(serialize(inst))
        fh.write("\n")


def load(path) -> NetworkInstance:
    """Read an instance file, validating schema and invariants."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("file", f"not valid JSON: {exc}") from exc
    for key in ("config", "positions", "g_user", "g_eave_true", "g_eave_est"):
        if key not in doc:
            raise SchemaError(key, "missing field")
    for key in ("bs", "users", "eaves"):
        if key not in doc["positions"]:
            raise SchemaError(f"positions.{key}", "missing field")
    config = NetworkConfig.from_dict(doc["config"])
    serving = np.repeat(np.arange(config.F), config.M_f)
    try:
        return NetworkInstance(
            config=config,
            g_user=np.asarray(doc["g_user"], dtype=float),
            g_eave_true=np.asarray(doc["g_eave_true"], dtype=float),
            g_eave_est=np.asarray(doc["g_eave_est"], dtype=float),
            serving=serving,
            pos_bs=np.asarray(doc["positions"]["bs"], dtype=float),
            pos_user=np.asarray(doc["positions"]["users"], dtype=float),
            pos_eave=np.asarray(doc["positions"]["eaves"], dtype=float),
        )
    except SchemaError:
        raise
    except (TypeError, ValueError) as exc:
        raise SchemaError("file", str(exc)) from exc


def make_instance(g_user, g_eave_true, M_f, *, g_eave_est=None, ell=None,
                  p_max=None, sigma2=1.0, epsilon=0.0, seed=0,
                  alpha=4.0) -> NetworkInstance:
    """Build an instance directly from gain tables (synthetic positions).

    Convenience constructor for tests and hand-crafted scenarios; positions
    are placeholders and carry no relation to the supplied gains.
    """
    g_user = np.atleast_3d(np.asarray(g_user, dtype=float))
    F, M, N = g_user.shape
    g_eave_true = np.asarray(g_eave_true, dtype=float).reshape(F, -1, N)
    E = g_eave_true.shape[1]
    if ell is None:
        ell = min(2, max(M_f))
    if g_eave_est is None:
        g_eave_est = g_eave_true.copy()
    config = NetworkConfig(
        F=F, M_f=tuple(M_f), E=E, N=N, ell=ell,
        p_max=p_max if p_max is not None else (10.0,) * F,
        sigma2=sigma2, alpha=alpha, r_mbs=2.0, r_sbs=1.0,
        epsilon=epsilon, seed=seed,
    )
    serving = np.repeat(np.arange(F), config.M_f)
    return NetworkInstance(
        config=config,
        g_user=g_user,
        g_eave_true=g_eave_true,
        g_eave_est=np.asarray(g_eave_est, dtype=float).reshape(F, E, N),
        serving=serving,
        pos_bs=np.zeros((F, 2)),
        pos_user=np.zeros((M, 2)),
        pos_eave=np.zeros((E, 2)),
    )
