"""Floquet solution of qubit polarization precession in a monochromatic field.

The polarization s(t) of a two-level system driven by the classical field
h(t) = (mu*cos(omega*t - phi), 0, nu/2) obeys ds/dt = 2 h x s, a linear ODE
with 2*pi/omega-periodic coefficients.  Floquet theory gives three
quasi-periodic fundamental solutions exp(i*Omega_k*t) * r_k(t), k = -1, 0, +1,
with Omega_0 = 0 and Omega_{+1} = -Omega_{-1} = Omega (the Rabi frequency,
folded into the zone (-omega/2, omega/2]).  Expanding the periodic parts
r_k(t) = sum_n rt[k,n,a] exp(-i*n*omega*(t - phi/omega)) turns the ODE into a
block-tridiagonal eigenproblem, which this module builds, truncates at
|n| <= n_max and diagonalizes.

Conventions: all frequencies in units of the field frequency (omega = 1 by
default), hbar = 1.  The Fourier tables are phi-independent; phi enters only
through the reconstruction time t - phi/omega.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    IllConditioned,
    IntegratorFailure,
    NearZoneBoundary,
    NotConverged,
    ValidationError,
)

__all__ = [
    "FloquetParams",
    "TruncatedGenerator",
    "FloquetSolution",
    "build_generator",
    "solve_floquet",
    "assemble_O",
    "assemble_Q",
    "mode_columns",
    "monodromy_oracle",
    "quasi_frequency_from_monodromy",
    "fold_frequency",
    "clear_solution_cache",
]

# Column/row order of the three physical modes everywhere in this package.
K_ORDER = (-1, 0, 1)

# Default Fourier truncation: the quasi-frequency converges already at 8 for
# mu <= 0.5, but the mode-vector tails need 10 to keep O(t) orthogonal to 1e-8
# at the strong-coupling end.
DEFAULT_N_MAX = 10

_ZONE_GUARD = 0.499       # |Omega| above this fraction of omega -> NearZoneBoundary
_COND_LIMIT = 1e8
_GAP_LIMIT = 1e-8


@dataclass(frozen=True)
class FloquetParams:
    """Drive parameters of the precession problem.

    delta is the detuning nu - omega of the qubit frequency from the field
    frequency, mu the transverse drive amplitude (interaction frequency
    scale), n_max the Fourier truncation order.  omega defaults to 1 and sets
    the frequency unit; it is a free parameter only so that the scale
    covariance of the solution can be exercised directly.
    """

    delta: float
    mu: float
    n_max: int = DEFAULT_N_MAX
    omega: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.omega) or self.omega <= 0:
            raise ValidationError(f"omega must be positive, got {self.omega}")
        if not np.isfinite(self.mu) or self.mu < 0:
            raise ValidationError(f"mu must be nonnegative, got {self.mu}")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValidationError(f"n_max must be an integer >= 1, got {self.n_max}")
        if not np.isfinite(self.delta) or self.nu <= 0:
            raise ValidationError(
                f"qubit frequency nu = omega + delta = {self.omega + self.delta} must be positive"
            )

    @property
    def nu(self) -> float:
        """Qubit frequency omega + delta."""
        return self.omega + self.delta

    @property
    def period(self) -> float:
        """Drive period 2*pi/omega."""
        return 2.0 * np.pi / self.omega


@dataclass(frozen=True, eq=False)
class TruncatedGenerator:
    """Truncated generator L of the Fourier-space eigenproblem L r = i*Omega r."""

    n_max: int
    entries: np.ndarray  # complex, (dim, dim)

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    def index(self, n: int, a: int) -> int:
        """Flat index of Fourier block n, polarization component a in {1, 2, 3}."""
        if abs(n) > self.n_max or a not in (1, 2, 3):
            raise ValidationError(f"index (n={n}, a={a}) outside the truncated basis")
        return 3 * (n + self.n_max) + (a - 1)


@dataclass(frozen=True, eq=False)
class FloquetSolution:
    """Solved Floquet problem: Rabi frequency and mode Fourier tables.

    fourier_table[k+1, n+n_max, a-1] holds rt[k,n,a]; r0_matrix is the t=0
    fundamental matrix r_{ak}(0) with columns ordered k = -1, 0, +1, and
    r0_inverse its inverse with rows in the same order.  The k=0 row of
    r0_inverse and the k=0 reconstruction r_0(t) are real; the k=-1 data are
    the n-flipped conjugates of the k=+1 data.
    """

    params: FloquetParams
    rabi_frequency: float
    fourier_table: np.ndarray   # complex, (3, 2*n_max+1, 3)
    r0_matrix: np.ndarray       # complex, (3, 3)
    r0_inverse: np.ndarray      # complex, (3, 3)
    r0_condition: float
    convergence_gap: float

    @property
    def quasi_frequencies(self) -> np.ndarray:
        """Omega_k for k = -1, 0, +1."""
        w = self.rabi_frequency
        return np.array([-w, 0.0, w])

    def fourier_coefficient(self, k: int, n: int, a: int) -> complex:
        """Single table entry rt[k,n,a] with the physical indices."""
        nm = self.params.n_max
        if k not in K_ORDER or abs(n) > nm or a not in (1, 2, 3):
            raise ValidationError(f"no Fourier coefficient at (k={k}, n={n}, a={a})")
        return complex(self.fourier_table[k + 1, n + nm, a - 1])


def build_generator(params: FloquetParams) -> TruncatedGenerator:
    """Assemble the truncated eigenproblem generator.

    Substituting s_a(t) = exp(i*Omega*t) sum_n rt[n,a] exp(-i*n*omega*t) into
    ds/dt = 2 h x s and matching Fourier modes gives L rt = i*Omega rt with

        L[(n,a),(n,a)]   = i*omega*n
        L[(n,1),(n,2)]   = -nu,    L[(n,2),(n,1)]   = +nu
        L[(n,2),(n+-1,3)] = -mu,   L[(n,3),(n+-1,2)] = +mu

    i.e. L = i*D + A with D real diagonal and A real antisymmetric, so the
    spectrum is purely imaginary: the flow is a rigid rotation.
    """
    nm = params.n_max
    dim = 3 * (2 * nm + 1)
    L = np.zeros((dim, dim), dtype=complex)

    def idx(n, a):
        return 3 * (n + nm) + (a - 1)

    for n in range(-nm, nm + 1):
        for a in (1, 2, 3):
            L[idx(n, a), idx(n, a)] = 1j * params.omega * n
        L[idx(n, 1), idx(n, 2)] = -params.nu
        L[idx(n, 2), idx(n, 1)] = params.nu
        for m in (n - 1, n + 1):
            if -nm <= m <= nm:
                L[idx(n, 2), idx(m, 3)] = -params.mu
                L[idx(n, 3), idx(m, 2)] = params.mu
    L.setflags(write=False)
    return TruncatedGenerator(n_max=nm, entries=L)


def fold_frequency(x, omega: float = 1.0):
    """Fold a frequency (or array) into the first zone (-omega/2, omega/2]."""
    y = np.asarray(x, dtype=float) - omega * np.round(np.asarray(x, dtype=float) / omega)
    y = np.where(y <= -omega / 2, y + omega, y)
    return float(y) if np.ndim(x) == 0 else y


def _reconstruct(table_k: np.ndarray, omega: float, times: np.ndarray) -> np.ndarray:
    """Time reconstruction sum_n rt[n,a] exp(-i n omega t) -> (T, 3)."""
    nm = (table_k.shape[0] - 1) // 2
    n = np.arange(-nm, nm + 1)
    phases = np.exp(-1j * omega * np.outer(times, n))
    return phases @ table_k


def _phase_fix_real(table_k: np.ndarray, omega: float) -> np.ndarray:
    """Rotate a zero-mode eigenvector's global phase so its reconstruction is real.

    A simple zero mode of the rotation flow is a complex phase times a real
    solution; the phase is recovered from the sum of squares of time samples.
    Returns the conjugate-symmetrized table (rt[n] = conj(rt[-n])) and raises
    NotConverged if no phase makes the mode real.
    """
    period = 2.0 * np.pi / omega
    ts = period * np.array([0.0, 0.137, 0.331, 0.459, 0.613, 0.771, 0.883, 0.941])
    samples = _reconstruct(table_k, omega, ts)
    z = np.sum(samples**2)
    if abs(z) < 1e-12 * np.sum(np.abs(samples) ** 2):
        raise NotConverged("zero-mode phase fixing is degenerate")
    fixed = table_k * np.exp(-0.5j * np.angle(z))
    flipped_conj = np.conj(fixed[::-1, :])
    asym = np.max(np.abs(fixed - flipped_conj))
    if asym > 1e-7 * max(1.0, np.max(np.abs(fixed))):
        raise NotConverged(f"zero mode is not real-representable (asymmetry {asym:.2e})")
    return 0.5 * (fixed + flipped_conj)


def _free_precession_solution(params: FloquetParams) -> FloquetSolution:
    """Explicit solution of the doubly degenerate case mu = 0, delta = 0.

    Free precession about axis 3 at nu = omega: all three quasi-frequencies
    fold to zero and the eigensolver's zero space is arbitrary, so the modes
    are fixed by hand: r_0 = e3 and r_{+1}(t) = (e1 - i e2) exp(i omega t)/sqrt(2).
    """
    nm = params.n_max
    table = np.zeros((3, 2 * nm + 1, 3), dtype=complex)
    table[1, nm, 2] = 1.0
    table[2, nm - 1, 0] = 1.0 / np.sqrt(2.0)
    table[2, nm - 1, 1] = -1j / np.sqrt(2.0)
    table[0] = np.conj(table[2][::-1, :])
    r0 = np.column_stack([table[k].sum(axis=0) for k in range(3)])
    r0_inv = r0.conj().T  # unitary columns
    for arr in (table, r0, r0_inv):
        arr.setflags(write=False)
    return FloquetSolution(
        params=params,
        rabi_frequency=0.0,
        fourier_table=table,
        r0_matrix=r0,
        r0_inverse=r0_inv,
        r0_condition=float(np.linalg.cond(r0)),
        convergence_gap=np.nan,
    )


@functools.lru_cache(maxsize=4096)
def _solve_core(delta: float, mu: float, n_max: int, omega: float) -> FloquetSolution:
    params = FloquetParams(delta=delta, mu=mu, n_max=n_max, omega=omega)
    if mu == 0.0 and abs(delta) < 1e-12 * omega:
        return _free_precession_solution(params)

    gen = build_generator(params)
    L = gen.entries
    # Structural guard: real part antisymmetric, imaginary part diagonal
    # (this is what makes the spectrum purely imaginary).
    A = L.real
    if np.max(np.abs(A + A.T)) > 1e-8 * omega:
        raise NotConverged("generator lost its rotation structure")

    # i*L is Hermitian; eigenvalues of L are i*(-theta).
    theta, vecs = np.linalg.eigh(1j * L)
    omegas = -theta

    order = np.argsort(np.abs(omegas))
    tri = order[:3]  # in-zone triplet {~0, ~+-Omega}; edge-distorted copies are far away
    k0 = tri[int(np.argmin(np.abs(omegas[tri])))]
    rest = [i for i in tri if i != k0]
    if omegas[rest[0]] > omegas[rest[1]]:
        pos, neg = rest
    else:
        neg, pos = rest

    rabi = float(omegas[pos])
    if abs(omegas[k0]) > 1e-8 * omega:
        raise NotConverged(f"zero quasi-frequency off by {omegas[k0]:.2e}")
    if rabi <= 0.0 or abs(omegas[neg] + rabi) > 1e-8 * omega:
        raise NotConverged("conjugate quasi-frequency pair not resolved")
    if rabi > _ZONE_GUARD * omega:
        raise NearZoneBoundary(
            f"|Omega| = {rabi:.4f} is within {omega / 2 - rabi:.4f} of the zone "
            f"boundary omega/2; mode identification is unreliable"
        )

    nm = params.n_max
    shape = (2 * nm + 1, 3)

    table0 = _phase_fix_real(vecs[:, k0].reshape(shape), omega)
    r0_at0 = table0.sum(axis=0).real
    scale = np.linalg.norm(r0_at0)
    if scale < 1e-12:
        raise IllConditioned("zero mode vanishes at t = 0")
    sgn = 1.0
    if r0_at0[2] < -1e-9 * scale:
        sgn = -1.0
    elif abs(r0_at0[2]) <= 1e-9 * scale and r0_at0[0] < 0.0:
        sgn = -1.0
    table0 = table0 * (sgn / scale)

    tablep = vecs[:, pos].reshape(shape).copy()
    rp_at0 = tablep.sum(axis=0)
    normp = np.linalg.norm(rp_at0)
    if normp < 1e-12:
        raise IllConditioned("k = +1 mode vanishes at t = 0")
    tablep /= normp
    for anchor in (tablep[nm, 0], tablep[nm, 1], tablep.ravel()[np.argmax(np.abs(tablep))]):
        if abs(anchor) > 1e-12:
            tablep = tablep * (np.conj(anchor) / abs(anchor))
            break
    tablem = np.conj(tablep[::-1, :])

    table = np.stack([tablem, table0, tablep])
    r0 = np.column_stack([table[k].sum(axis=0) for k in range(3)])
    cond = float(np.linalg.cond(r0))
    if cond > _COND_LIMIT:
        raise IllConditioned(f"fundamental matrix condition number {cond:.2e} exceeds {_COND_LIMIT:.0e}")
    r0_inv = np.linalg.inv(r0)
    if np.max(np.abs(r0_inv[1].imag)) > 1e-8 * np.max(np.abs(r0_inv)):
        raise IllConditioned("k = 0 row of the inverse fundamental matrix is not real")
    # Exact symmetries of the inverse: real k=0 row, conjugate k=+-1 rows.
    r0_inv[1] = r0_inv[1].real
    row_m = 0.5 * (r0_inv[0] + np.conj(r0_inv[2]))
    r0_inv[0] = row_m
    r0_inv[2] = np.conj(row_m)

    for arr in (table, r0, r0_inv):
        arr.setflags(write=False)
    return FloquetSolution(
        params=params,
        rabi_frequency=rabi,
        fourier_table=table,
        r0_matrix=r0,
        r0_inverse=r0_inv,
        r0_condition=cond,
        convergence_gap=np.nan,
    )


def solve_floquet(params: FloquetParams) -> FloquetSolution:
    """Diagonalize the truncated generator and identify the three physical modes.

    Mode identification: the k=0 mode is the in-zone eigenvalue of minimal
    modulus (its eigenvector reconstructs to a real r_0(t) after global phase
    fixing); k = +1 is the in-zone eigenvalue with Omega in (0, omega/2].
    The convergence gap |Omega(n_max) - Omega(n_max - 2)| is reported (NaN
    for n_max < 3, where no smaller truncation exists).

    Raises NearZoneBoundary when Omega comes within 1e-3*omega of the zone
    boundary omega/2 (where the branch choice is ambiguous), IllConditioned
    if the t=0 fundamental matrix has condition number above 1e8, and
    NotConverged if the truncation is too small for the requested drive.
    """
    sol = _solve_core(params.delta, params.mu, params.n_max, params.omega)
    if params.n_max >= 3:
        smaller = _solve_core(params.delta, params.mu, params.n_max - 2, params.omega)
        gap = abs(sol.rabi_frequency - smaller.rabi_frequency)
        if gap > _GAP_LIMIT * params.omega:
            raise NotConverged(
                f"convergence gap {gap:.2e} at n_max = {params.n_max}; raise n_max"
            )
    else:
        gap = np.nan
    return replace(sol, convergence_gap=gap)


def clear_solution_cache() -> None:
    """Drop memoized Floquet solutions (they are pure functions of the inputs)."""
    _solve_core.cache_clear()


def mode_columns(sol: FloquetSolution, t, phi: float = 0.0) -> np.ndarray:
    """Periodic mode vectors r_k(t) as columns k = -1, 0, +1 of a 3x3 matrix.

    Vectorized: an array of times returns shape (len(t), 3, 3) with axes
    (time, component a, mode k).  phi shifts the drive phase, entering only
    through the reconstruction time t - phi/omega.
    """
    nm = sol.params.n_max
    omega = sol.params.omega
    n = np.arange(-nm, nm + 1)
    tarr = np.atleast_1d(np.asarray(t, dtype=float))
    phases = np.exp(-1j * omega * np.outer(tarr - phi / omega, n))
    cols = np.einsum("tn,kna->tak", phases, sol.fourier_table)
    return cols if np.ndim(t) else cols[0]


def assemble_O(sol: FloquetSolution, t: float) -> np.ndarray:
    """Rotation matrix O(t) = sum_k exp(i Omega_k t) r_k(t) r^-1_k (real 3x3).

    O(t) maps the initial polarization to the polarization at time t for the
    drive phase phi = 0; O(0) is the identity.  The imaginary residue of the
    mode sum is asserted below 1e-9 and discarded.
    """
    cols = mode_columns(sol, t)
    phases = np.exp(1j * np.multiply.outer(np.asarray(t, dtype=float), sol.quasi_frequencies))
    O = np.einsum("...ak,...k,kb->...ab", cols, phases, sol.r0_inverse)
    resid = np.max(np.abs(O.imag))
    if resid > 1e-9:
        raise IllConditioned(f"imaginary residue {resid:.2e} in O(t)")
    return O.real


def assemble_Q(sol: FloquetSolution, t) -> np.ndarray:
    """Long-time (collapsed) response Q(t) = r_0(t) r^-1_0: real, rank 1, periodic.

    Vectorized over t like mode_columns.
    """
    cols = mode_columns(sol, t)
    r0t = cols[..., :, 1]
    resid = np.max(np.abs(r0t.imag))
    if resid > 1e-9:
        raise IllConditioned(f"imaginary residue {resid:.2e} in r_0(t)")
    row0 = sol.r0_inverse[1].real
    return np.einsum("...a,b->...ab", r0t.real, row0)


def monodromy_oracle(params: FloquetParams, t_end: float, steps: int = 64) -> np.ndarray:
    """Fundamental matrix of ds/dt = 2 h(t) x s by direct adaptive integration.

    Independent of the Floquet solve (time-domain DOP853 at rtol 1e-12 with
    phi = 0); used as the cross-check oracle for quasi-frequencies and O(t).
    steps additionally caps the step size at t_end/steps; accuracy is set by
    the tolerances, which reach ~1e-11 over one period.  For t_end = 2*pi/omega
    the eigenvalues of the result are {1, exp(+-i Omega T)}.
    """
    if steps < 1:
        raise ValidationError(f"steps must be >= 1, got {steps}")
    if t_end < 0:
        raise ValidationError(f"t_end must be nonnegative, got {t_end}")
    if t_end == 0:
        return np.eye(3)
    nu = params.nu
    two_mu = 2.0 * params.mu
    omega = params.omega

    def rhs(t, y):
        hx = two_mu * np.cos(omega * t)
        m = y.reshape(3, 3)
        out = np.empty_like(m)
        out[0] = -nu * m[1]
        out[1] = nu * m[0] - hx * m[2]
        out[2] = hx * m[1]
        return out.ravel()

    result = solve_ivp(
        rhs,
        (0.0, t_end),
        np.eye(3).ravel(),
        method="DOP853",
        rtol=1e-12,
        atol=1e-13,
        max_step=t_end / steps if steps > 1 else np.inf,
    )
    if not result.success:
        raise IntegratorFailure(result.message)
    return result.y[:, -1].reshape(3, 3)


def quasi_frequency_from_monodromy(monodromy: np.ndarray, omega: float = 1.0) -> float:
    """Rabi frequency |Omega| from the eigenvalue phases of a one-period monodromy."""
    period = 2.0 * np.pi / omega
    ev = np.linalg.eigvals(monodromy)
    return float(abs(np.angle(ev[int(np.argmax(np.abs(ev.imag)))])) / period)
