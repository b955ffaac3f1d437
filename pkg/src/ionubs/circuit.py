"""Multi-mode bosonic circuits on two backends.

Gaussian backend: quadrature means and covariances in xxpp ordering,
r = (x_1..x_M, p_1..p_M) with x = (a + a^dag)/sqrt2, p = (a - a^dag)/(i sqrt2);
vacuum covariance I/2.  A gate acting as a -> U a + V a^dag + d in the
Heisenberg picture has symplectic matrix

    S = [[Re(U+V), -Im(U-V)], [Im(U+V), Re(U-V)]].

Fock backend: an M-mode state is a complex tensor of shape (N,)*M.  Linear
gates are exponentials of their quadratic generators, the nonlinear phase is
exactly diagonal, and measurements return both projector branches.

Gate conventions (Heisenberg action a -> U^dag a U):
    Displace(alpha)      exp(alpha a^dag - alpha* a)          a -> a + alpha
    Phase(phi)           exp(-i phi n)                        a -> a e^{-i phi}
    Squeeze(g)           exp((g* a^2 - g a^dag^2)/2)          a -> a cosh|g| - a^dag e^{i arg g} sinh|g|
    BeamSplit(th, phi)   exp(i th/2 (e^{i phi} a1^dag a2 + h.c.))
                                                              a -> exp(i th/2 M) a,
                                                              M = [[0, e^{i phi}], [e^{-i phi}, 0]]
    NonlinearPhase(mu)   exp(-i mu (6 n(n-1) + 12 n))
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .errors import ConfigError, DimensionError, UnsupportedOpError
from .fock_sim import FockState, build_ladders, quadrature_powers
from .synth import nonlinear_phases

MAX_MODES = 3
MAX_CUT = 24
FOCK_PAD = 24
PROJ_TOL = 1e-10


def symplectic_form(m: int) -> np.ndarray:
    z, i = np.zeros((m, m)), np.eye(m)
    return np.block([[z, i], [-i, z]])


# -- measurement operators ---------------------------------------------------

class PVMKind(Enum):
    THRESHOLD = "threshold"
    FOCK = "fock"
    COHERENT = "coherent"


@dataclass(frozen=True)
class PVM:
    """Two-outcome projective measurement on a single mode.

    THRESHOLD(m): positive = sum_{n <= m} |n><n|
    FOCK(m):      positive = |m><m|
    COHERENT(a):  positive = |a><a| (normalised in the truncated space)
    """

    kind: PVMKind
    value: complex = 0

    def projectors(self, n_cut: int) -> tuple[np.ndarray, np.ndarray]:
        if self.kind is PVMKind.THRESHOLD:
            pos = np.diag((np.arange(n_cut) <= int(self.value.real)).astype(complex))
        elif self.kind is PVMKind.FOCK:
            m = int(self.value.real)
            if not 0 <= m < n_cut:
                raise DimensionError(f"Fock projector |{m}> outside cutoff {n_cut}")
            pos = np.zeros((n_cut, n_cut), dtype=complex)
            pos[m, m] = 1
        else:
            v = FockState.coherent(complex(self.value), n_cut).amplitudes
            pos = np.outer(v, v.conj())
        return pos, np.eye(n_cut) - pos

    def check(self, n_cut: int, tol: float = PROJ_TOL) -> float:
        """Largest violation of completeness or idempotence."""
        pos, neg = self.projectors(n_cut)
        err = np.linalg.norm(pos + neg - np.eye(n_cut), 2)
        for p in (pos, neg):
            err = max(err, np.linalg.norm(p @ p - p, 2))
        if err > tol:
            raise ValueError(f"PVM violates projector algebra by {err:.2e}")
        return float(err)


def Threshold(m: int) -> PVM:
    return PVM(PVMKind.THRESHOLD, m)


def FockProjector(m: int) -> PVM:
    return PVM(PVMKind.FOCK, m)


def CoherentProjector(alpha: complex) -> PVM:
    return PVM(PVMKind.COHERENT, alpha)


# -- circuit operations ------------------------------------------------------

class OpKind(Enum):
    DISPLACE = "D"
    PHASE = "P"
    SQUEEZE = "S"
    BEAMSPLIT = "BS"
    NONLINEAR = "NL"
    MEASURE = "M"


LINEAR = {OpKind.DISPLACE, OpKind.PHASE, OpKind.SQUEEZE, OpKind.BEAMSPLIT}


@dataclass(frozen=True)
class CircuitOp:
    kind: OpKind
    modes: tuple
    value: complex = 0
    phi: float = 0.0
    pvm: PVM | None = None

    def __post_init__(self):
        if any(m < 0 for m in self.modes):
            raise ValueError("mode indices must be non-negative")
        if self.kind is OpKind.BEAMSPLIT and (len(self.modes) != 2 or self.modes[0] == self.modes[1]):
            raise ValueError("BeamSplit needs two distinct modes")
        if self.kind is OpKind.MEASURE and self.pvm is None:
            raise ValueError("Measure needs a PVM")

    @property
    def is_linear(self) -> bool:
        return self.kind in LINEAR

    def check_modes(self, n_modes: int):
        if max(self.modes) >= n_modes:
            raise ValueError(f"{self.kind.value} acts on mode {max(self.modes)} but circuit has {n_modes}")


def Displace(mode, alpha):
    return CircuitOp(OpKind.DISPLACE, (mode,), complex(alpha))


def Phase(mode, phi):
    return CircuitOp(OpKind.PHASE, (mode,), float(phi))


def Squeeze(mode, g):
    return CircuitOp(OpKind.SQUEEZE, (mode,), complex(g))


def BeamSplit(i, j, theta, phi=0.0):
    return CircuitOp(OpKind.BEAMSPLIT, (i, j), float(theta), float(phi))


def NonlinearPhase(mode, mu):
    return CircuitOp(OpKind.NONLINEAR, (mode,), float(mu))


def Measure(mode, pvm: PVM):
    return CircuitOp(OpKind.MEASURE, (mode,), pvm=pvm)


# -- Gaussian backend -----------------------------------------------------------

@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        m2 = self.mean.size
        if m2 % 2 or self.covariance.shape != (m2, m2):
            raise ValueError("mean must have length 2M and covariance shape 2M x 2M")

    @property
    def n_modes(self) -> int:
        return self.mean.size // 2

    @classmethod
    def vacuum(cls, n_modes: int) -> "GaussianState":
        return cls(np.zeros(2 * n_modes), np.eye(2 * n_modes) / 2)

    @classmethod
    def coherent(cls, alphas) -> "GaussianState":
        alphas = np.asarray(alphas, dtype=complex)
        return cls(np.sqrt(2) * np.concatenate([alphas.real, alphas.imag]), np.eye(2 * alphas.size) / 2)

    def uncertainty_violation(self) -> float:
        """Most negative eigenvalue of cov + (i/2) Omega (0 when physical)."""
        h = self.covariance + 0.5j * symplectic_form(self.n_modes)
        return float(max(0.0, -np.linalg.eigvalsh(h).min()))

    def check(self, tol: float = 1e-10):
        if np.max(np.abs(self.covariance - self.covariance.T)) > tol:
            raise ValueError("covariance not symmetric")
        if self.uncertainty_violation() > tol:
            raise ValueError("covariance violates the uncertainty relation")


def _bs_mode_matrix(theta: float, phi: float) -> np.ndarray:
    """exp(i theta/2 M) as local phases around the real mixer."""
    d = np.diag([np.exp(1j * phi / 2), np.exp(-1j * phi / 2)])
    mix = np.array([[np.cos(theta / 2), 1j * np.sin(theta / 2)],
                    [1j * np.sin(theta / 2), np.cos(theta / 2)]])
    return d @ mix @ d.conj()


def bogoliubov(op: CircuitOp, n_modes: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(U, V, d) with a -> U a + V a^dag + d for a linear op."""
    if not op.is_linear:
        raise UnsupportedOpError(f"{op.kind.name} is not a linear gate")
    op.check_modes(n_modes)
    U = np.eye(n_modes, dtype=complex)
    V = np.zeros((n_modes, n_modes), dtype=complex)
    d = np.zeros(n_modes, dtype=complex)
    k = op.modes[0]
    if op.kind is OpKind.DISPLACE:
        d[k] = op.value
    elif op.kind is OpKind.PHASE:
        U[k, k] = np.exp(-1j * op.value.real)
    elif op.kind is OpKind.SQUEEZE:
        r, th = abs(op.value), np.angle(op.value)
        U[k, k] = np.cosh(r)
        V[k, k] = -np.exp(1j * th) * np.sinh(r)
    else:
        i, j = op.modes
        U[np.ix_([i, j], [i, j])] = _bs_mode_matrix(op.value.real, op.phi)
    return U, V, d


def symplectic_matrix(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    return np.block([[(U + V).real, -(U - V).imag], [(U + V).imag, (U - V).real]])


def apply_gaussian(state: GaussianState, op: CircuitOp) -> GaussianState:
    U, V, d = bogoliubov(op, state.n_modes)
    S = symplectic_matrix(U, V)
    shift = np.sqrt(2) * np.concatenate([d.real, d.imag])
    return GaussianState(S @ state.mean + shift, S @ state.covariance @ S.T)


# -- Fock backend ---------------------------------------------------------------

@dataclass(frozen=True)
class MultiModeState:
    tensor: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.tensor.ndim

    @property
    def n_cut(self) -> int:
        return self.tensor.shape[0]

    @classmethod
    def product(cls, states) -> "MultiModeState":
        t = np.array(1.0 + 0j)
        for s in states:
            t = np.multiply.outer(t, s.amplitudes)
        return cls(t)

    @classmethod
    def vacuum(cls, n_modes: int, n_cut: int) -> "MultiModeState":
        return cls.product([FockState.fock(0, n_cut)] * n_modes)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.tensor))


@dataclass(frozen=True)
class MeasureOutcome:
    p_positive: float
    positive: MultiModeState | None
    p_negative: float
    negative: MultiModeState | None


def _check_budget(n_modes: int, n_cut: int):
    if n_modes > MAX_MODES or n_cut > MAX_CUT:
        raise DimensionError(f"Fock backend limited to {MAX_MODES} modes at n_cut <= {MAX_CUT}")


@lru_cache(maxsize=256)
def _single_mode_unitary(kind: OpKind, value: complex, n_cut: int) -> np.ndarray:
    if kind is OpKind.PHASE:
        return np.diag(np.exp(-1j * value.real * np.arange(n_cut)))
    if kind is OpKind.NONLINEAR:
        return np.diag(nonlinear_phases(value.real, n_cut))
    big = build_ladders(n_cut + FOCK_PAD)
    a, ad = big.a, big.adag
    if kind is OpKind.DISPLACE:
        gen = value * ad - np.conj(value) * a
    elif kind is OpKind.SQUEEZE:
        gen = 0.5 * (np.conj(value) * a @ a - value * ad @ ad)
    else:
        raise UnsupportedOpError(kind.name)
    return expm(gen)[:n_cut, :n_cut]


@lru_cache(maxsize=64)
def _beamsplit_unitary(theta: float, phi: float, n_cut: int) -> np.ndarray:
    lad = build_ladders(n_cut)
    eye = np.eye(n_cut)
    a1, a2 = np.kron(lad.a, eye), np.kron(eye, lad.a)
    mix = expm(0.5j * theta * (a1.conj().T @ a2 + a2.conj().T @ a1))
    n1, n2 = np.kron(lad.n, eye), np.kron(eye, lad.n)
    rot = np.diag(np.exp(0.5j * phi * np.diag(n1 - n2).real))
    return rot @ mix @ rot.conj()


def _apply_single(tensor: np.ndarray, u: np.ndarray, mode: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(u, tensor, axes=([1], [mode])), 0, mode)


def _apply_pair(tensor: np.ndarray, u: np.ndarray, i: int, j: int) -> np.ndarray:
    n = tensor.shape[0]
    t = np.moveaxis(tensor, (i, j), (0, 1))
    shape = t.shape
    t = (u @ t.reshape(n * n, -1)).reshape(shape)
    return np.moveaxis(t, (0, 1), (i, j))


def apply_fock(state: MultiModeState, op: CircuitOp):
    """Apply an op; Measure returns a :class:`MeasureOutcome` holding both branches."""
    _check_budget(state.n_modes, state.n_cut)
    op.check_modes(state.n_modes)
    n = state.n_cut
    if op.kind is OpKind.BEAMSPLIT:
        u = _beamsplit_unitary(op.value.real, op.phi, n)
        return MultiModeState(_apply_pair(state.tensor, u, *op.modes))
    if op.kind is OpKind.MEASURE:
        pos, neg = op.pvm.projectors(n)
        branches = []
        for proj in (pos, neg):
            t = _apply_single(state.tensor, proj, op.modes[0])
            p = float(np.vdot(t, t).real)
            branches += [p, MultiModeState(t / np.sqrt(p)) if p > 0 else None]
        return MeasureOutcome(*branches)
    u = _single_mode_unitary(op.kind, complex(op.value), n)
    return MultiModeState(_apply_single(state.tensor, u, op.modes[0]))


def fock_moments(state: MultiModeState) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature means and symmetrised covariance (xxpp) of a Fock-backend state."""
    m, n = state.n_modes, state.n_cut
    lad = build_ladders(n + FOCK_PAD)
    x_big = lad.q
    p_big = lad.p
    quads = [x_big[:n, :n]] * m + [p_big[:n, :n]] * m
    prods = {}
    for key, op in (("xx", x_big @ x_big), ("pp", p_big @ p_big), ("xp", x_big @ p_big), ("px", p_big @ x_big)):
        prods[key] = op[:n, :n]
    psi = state.tensor
    norm = np.vdot(psi, psi).real

    def ev(ops_by_mode):
        t = psi
        for mode, o in ops_by_mode:
            t = _apply_single(t, o, mode)
        return np.vdot(psi, t) / norm

    mean = np.array([ev([(k % m, quads[k])]).real for k in range(2 * m)])
    cov = np.zeros((2 * m, 2 * m))
    for a in range(2 * m):
        for b in range(a, 2 * m):
            ma, mb = a % m, b % m
            la, lb = "x" if a < m else "p", "x" if b < m else "p"
            if ma == mb:
                sym = 0.5 * (ev([(ma, prods[la + lb])]) + ev([(ma, prods[lb + la])]))
            else:
                sym = ev([(ma, quads[a]), (mb, quads[b])])
            cov[a, b] = cov[b, a] = sym.real - mean[a] * mean[b]
    return mean, cov


# -- composition ---------------------------------------------------------------

@dataclass
class CircuitResult:
    backend: str
    state: object
    success_probability: float = 1.0
    outcomes: list = field(default_factory=list)


def run_circuit(ops, n_modes: int, backend: str = "auto", n_cut: int = 16,
                gaussian_input: GaussianState | None = None,
                fock_input: MultiModeState | None = None) -> CircuitResult:
    """Run ``ops``; measurements post-select the positive branch."""
    ops = list(ops)
    for op in ops:
        op.check_modes(n_modes)
    if backend == "auto":
        backend = "gaussian" if all(op.is_linear for op in ops) else "fock"
    if backend == "gaussian":
        state = gaussian_input or GaussianState.vacuum(n_modes)
        for op in ops:
            state = apply_gaussian(state, op)
        return CircuitResult("gaussian", state)
    if backend != "fock":
        raise ValueError(f"unknown backend {backend!r}")
    _check_budget(n_modes, n_cut)
    state = fock_input or MultiModeState.vacuum(n_modes, n_cut)
    prob, outcomes = 1.0, []
    for op in ops:
        out = apply_fock(state, op)
        if isinstance(out, MeasureOutcome):
            outcomes.append(out.p_positive)
            prob *= out.p_positive
            if out.positive is None:
                return CircuitResult("fock", None, 0.0, outcomes)
            state = out.positive
        else:
            state = out
    return CircuitResult("fock", state, prob, outcomes)


@dataclass(frozen=True)
class CrossValidation:
    mean_error: float
    covariance_error: float
    gaussian: GaussianState
    fock_norm: float

    @property
    def max_error(self) -> float:
        return max(self.mean_error, self.covariance_error)


def cross_validate(ops, alphas, n_cut: int = 24) -> CrossValidation:
    """Run a linear circuit on both backends from the coherent product input |alphas>."""
    ops = list(ops)
    if not all(op.is_linear for op in ops):
        raise UnsupportedOpError("cross-validation needs a linear circuit")
    alphas = list(alphas)
    m = len(alphas)
    g = run_circuit(ops, m, "gaussian", gaussian_input=GaussianState.coherent(alphas)).state
    start = MultiModeState.product([FockState.coherent(a, n_cut) for a in alphas])
    f = run_circuit(ops, m, "fock", n_cut=n_cut, fock_input=start).state
    mean, cov = fock_moments(f)
    return CrossValidation(float(np.max(np.abs(mean - g.mean))), float(np.max(np.abs(cov - g.covariance))),
                           g, f.norm)


def concatenate_commutator(Y: np.ndarray, Z: np.ndarray, dt: float, reps: int = 1) -> np.ndarray:
    """(e^{iY dt} e^{iZ dt} e^{-iY dt} e^{-iZ dt})^reps, approximating exp(-[Y, Z] reps dt^2)."""
    if np.max(np.abs(Y - Y.conj().T)) > 1e-12 or np.max(np.abs(Z - Z.conj().T)) > 1e-12:
        raise ValueError("Y and Z must be Hermitian")
    ey, ez = expm(1j * Y * dt), expm(1j * Z * dt)
    step = ey @ ez @ ey.conj().T @ ez.conj().T
    return np.linalg.matrix_power(step, reps)


def commutator_target(Y: np.ndarray, Z: np.ndarray, dt: float, reps: int = 1) -> np.ndarray:
    return expm(-(Y @ Z - Z @ Y) * reps * dt ** 2)


def commutator_error(Y, Z, dt, reps=1) -> float:
    return float(np.linalg.norm(concatenate_commutator(Y, Z, dt, reps) - commutator_target(Y, Z, dt, reps), 2))


def commutator_slope(Y, Z, dts=(1e-2, 5e-3, 2.5e-3)) -> float:
    errs = [commutator_error(Y, Z, dt) for dt in dts]
    return float(np.polyfit(np.log(dts), np.log(errs), 1)[0])


# -- circuit description files ---------------------------------------------------

_KEYS = {"D": {"alpha"}, "P": {"phi"}, "S": {"g"}, "BS": {"theta", "phi"}, "NL": {"mu"},
         "M": {"m", "alpha"}}
_ARITY = {"D": 1, "P": 1, "S": 1, "BS": 2, "NL": 1, "M": 1}


def parse_circuit(text: str) -> tuple[int, list[CircuitOp]]:
    """Parse the line-oriented circuit format (see README for the grammar).

    Returns (number of modes, ops).  ``MODES n`` fixes the mode count;
    otherwise it is one more than the largest index used.
    """
    ops, n_modes = [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        name = tok[0].upper()
        try:
            if name == "MODES":
                n_modes = int(tok[1])
                continue
            if name not in _ARITY:
                raise ConfigError(f"unknown op {tok[0]!r}")
            arity = _ARITY[name]
            modes = tuple(int(x) for x in tok[1:1 + arity])
            rest = tok[1 + arity:]
            kind = None
            if name == "M":
                if not rest or "=" in rest[0]:
                    raise ConfigError("M needs a kind: threshold, fock or coherent")
                kind, rest = rest[0].lower(), rest[1:]
            kw = {}
            for item in rest:
                k, _, v = item.partition("=")
                if k not in _KEYS[name] or not v:
                    raise ConfigError(f"bad argument {item!r} for {name}")
                kw[k] = complex(v.replace("i", "j")) if k in ("alpha", "g") else float(v)
            ops.append(_make_op(name, modes, kw, kind))
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
    used = 1 + max((max(op.modes) for op in ops), default=-1)
    n_modes = used if n_modes is None else n_modes
    if used > n_modes:
        raise ConfigError(f"circuit uses mode {used - 1} but declares MODES {n_modes}")
    return n_modes, ops


def _make_op(name, modes, kw, kind):
    if name == "D":
        return Displace(modes[0], kw["alpha"])
    if name == "P":
        return Phase(modes[0], kw["phi"])
    if name == "S":
        return Squeeze(modes[0], kw["g"])
    if name == "BS":
        return BeamSplit(*modes, kw["theta"], kw.get("phi", 0.0))
    if name == "NL":
        return NonlinearPhase(modes[0], kw["mu"])
    if kind == "threshold":
        return Measure(modes[0], Threshold(int(kw["m"].real if isinstance(kw["m"], complex) else kw["m"])))
    if kind == "fock":
        return Measure(modes[0], FockProjector(int(kw["m"])))
    if kind == "coherent":
        return Measure(modes[0], CoherentProjector(kw["alpha"]))
    raise ConfigError(f"unknown measurement kind {kind!r}")
