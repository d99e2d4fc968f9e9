"""Exact quantum evolution of a qubit coupled to one truncated-Fock-space mode.

Ground truth for the semiclassical predictions: the full Hamiltonian

    H = omega (a^dag a + 1/2) + (nu/2) sigma_3 + g (a + a^dag) sigma_1

is built in the product basis of N_F Fock states and the qubit, and a
coherent-state x qubit product state is evolved unitarily.  For a mode with
mean photon number n_bar, the classical field seen by the qubit has amplitude
2 g sqrt(n_bar), so a run that should match Floquet data at interaction
strength mu uses g = mu / (2 sqrt(n_bar)); the semiclassical small parameter
is epsilon = 1/n_bar.

The reduced-field state is rank <= 2 (the total state stays pure), which the
Husimi fragment analysis exploits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
from scipy.special import gammaln

from .errors import CutoffReflection, PeaksUnresolved, ValidationError

__all__ = [
    "FockConfig",
    "QuantumTrace",
    "FragmentAnalysis",
    "build_hamiltonian",
    "coherent_state",
    "qubit_state",
    "evolve",
    "evolve_states",
    "fragment_analysis",
    "husimi",
    "oscillation_envelope",
    "envelope_crossing_time",
]

_DENSE_LIMIT = 3000          # eigendecomposition below, Krylov stepping above
_NORM_TOL = 1e-8
_TOP_OCCUPATION_TOL = 1e-6
_TAIL_TOL = 1e-8

HUSIMI_GRID_POINTS = 161
_PEAK_FLOOR = 1e-3           # local maxima below this fraction of the peak are ignored
_PACKET_WIDTH = 1.0          # Husimi 1/e radius of a coherent fragment, in beta units


@dataclass(frozen=True)
class FockConfig:
    """Oracle run configuration.

    g is the physical dipole coupling; use from_interaction() to derive it
    from a Floquet interaction strength mu.  The cutoff must leave the
    coherent tail below 1e-8, i.e. cutoff >= n_bar + 12 sqrt(n_bar).
    """

    n_bar: float
    cutoff: int
    g: float
    nu: float
    dt: float
    t_end: float
    omega: float = 1.0

    def __post_init__(self):
        if self.n_bar <= 0 or self.n_bar > 1e4:
            raise ValidationError(f"n_bar must lie in (0, 1e4], got {self.n_bar}")
        if int(self.cutoff) != self.cutoff or self.cutoff < 2:
            raise ValidationError(f"cutoff must be an integer >= 2, got {self.cutoff}")
        if self.cutoff < self.n_bar + 12.0 * np.sqrt(self.n_bar):
            raise ValidationError(
                f"cutoff {self.cutoff} too small for n_bar = {self.n_bar}; "
                f"need at least n_bar + 12 sqrt(n_bar) = {self.n_bar + 12 * np.sqrt(self.n_bar):.1f}"
            )
        if self.g < 0:
            raise ValidationError(f"g must be nonnegative, got {self.g}")
        if self.nu <= 0 or self.omega <= 0:
            raise ValidationError("frequencies nu and omega must be positive")
        if self.dt <= 0 or self.t_end < self.dt:
            raise ValidationError("need 0 < dt <= t_end")

    @classmethod
    def from_interaction(
        cls,
        mu: float,
        delta: float,
        n_bar: float,
        cutoff: int | None = None,
        dt: float = 0.25,
        t_end: float = 100.0,
        omega: float = 1.0,
    ) -> "FockConfig":
        """Configuration matching Floquet interaction strength mu and detuning delta.

        The coherent state alpha = sqrt(n_bar) drives the qubit with classical
        amplitude 2 g alpha, so g = mu / (2 sqrt(n_bar)) reproduces the
        precession problem at interaction strength mu.
        """
        if mu < 0:
            raise ValidationError(f"mu must be nonnegative, got {mu}")
        if cutoff is None:
            cutoff = int(np.ceil(n_bar + 14.0 * np.sqrt(n_bar)))
        return cls(
            n_bar=n_bar,
            cutoff=cutoff,
            g=mu / (2.0 * np.sqrt(n_bar)),
            nu=omega + delta,
            dt=dt,
            t_end=t_end,
            omega=omega,
        )

    @property
    def epsilon(self) -> float:
        """Semiclassical small parameter 1/n_bar."""
        return 1.0 / self.n_bar

    @property
    def mu(self) -> float:
        """Floquet interaction strength 2 g sqrt(n_bar) seen by the qubit."""
        return 2.0 * self.g * np.sqrt(self.n_bar)


@dataclass(frozen=True, eq=False)
class QuantumTrace:
    """Exact-evolution time series of qubit and field observables."""

    times: np.ndarray
    sigma_expectations: np.ndarray   # (T, 3)
    purity: np.ndarray               # (T,)
    norm_drift: np.ndarray           # (T,) |norm - 1|
    top_occupation: np.ndarray       # (T,) probability at the highest Fock level
    field_a: np.ndarray              # (T,) complex <a>
    photon_number: np.ndarray        # (T,) <a^dag a>
    energy_drift: float              # max relative drift of <H>
    coherent_tail: float             # truncated mass of the initial coherent state


@dataclass(frozen=True, eq=False)
class FragmentAnalysis:
    """Two-peak decomposition of the reduced field state in rotating-frame phase space."""

    times: np.ndarray
    peak_centers: np.ndarray         # (T, 2) complex, rotating frame
    peak_weights: np.ndarray         # (T, 2)
    separation: np.ndarray           # (T,)


def coherent_state(alpha: complex, cutoff: int) -> tuple[np.ndarray, float]:
    """Truncated coherent state (renormalized) and the truncated tail mass.

    Coefficients are built in log space so large |alpha| cannot overflow.
    """
    n = np.arange(cutoff)
    a = abs(alpha)
    if a == 0.0:
        vec = np.zeros(cutoff, dtype=complex)
        vec[0] = 1.0
        return vec, 0.0
    log_mag = -0.5 * a * a + n * np.log(a) - 0.5 * gammaln(n + 1.0)
    vec = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))
    mass = float(np.sum(np.abs(vec) ** 2))
    tail = max(0.0, 1.0 - mass)
    return vec / np.sqrt(mass), tail


def qubit_state(p) -> np.ndarray:
    """Pure qubit state with polarization vector p (|p| = 1)."""
    p = np.asarray(p, dtype=float)
    if p.shape != (3,) or abs(np.linalg.norm(p) - 1.0) > 1e-12:
        raise ValidationError(f"polarization must be a unit 3-vector, got {p}")
    theta = np.arccos(np.clip(p[2], -1.0, 1.0))
    phi = np.arctan2(p[1], p[0])
    return np.array([np.cos(theta / 2.0), np.exp(1j * phi) * np.sin(theta / 2.0)])


def build_hamiltonian(config: FockConfig) -> sparse.csr_matrix:
    """Sparse Hamiltonian in the Fock (x) qubit product basis (dimension 2*cutoff)."""
    nf = config.cutoff
    n = np.arange(nf)
    number = sparse.diags(n + 0.5)
    lower = sparse.diags(np.sqrt(n[1:]), 1)      # annihilation operator
    quad = lower + lower.T                       # a + a^dag
    s3 = sparse.diags([1.0, -1.0])
    s1 = sparse.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    eye2 = sparse.identity(2)
    H = (
        config.omega * sparse.kron(number, eye2)
        + 0.5 * config.nu * sparse.kron(sparse.identity(nf), s3)
        + config.g * sparse.kron(quad, s1)
    )
    return H.tocsr()


def _initial_state(config: FockConfig, p) -> tuple[np.ndarray, float]:
    field, tail = coherent_state(np.sqrt(config.n_bar), config.cutoff)
    if tail > _TAIL_TOL:
        raise ValidationError(
            f"coherent tail mass {tail:.2e} above {_TAIL_TOL:.0e}; raise the cutoff"
        )
    psi = np.kron(field, qubit_state(p))
    return psi, tail


def evolve_states(config: FockConfig, p, times) -> np.ndarray:
    """State vectors at the requested times, shape (T, cutoff, 2).

    Full eigendecomposition below dimension 3000 (exact over arbitrarily long
    horizons), Krylov exponential stepping above.
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValidationError("times must be nonnegative")
    psi0, _ = _initial_state(config, p)
    H = build_hamiltonian(config)
    dim = H.shape[0]
    if dim <= _DENSE_LIMIT:
        energies, modes = scipy.linalg.eigh(H.toarray())
        weights = modes.conj().T @ psi0
        phases = np.exp(-1j * np.outer(times, energies))
        states = (phases * weights) @ modes.T
    else:
        order = np.argsort(times)
        states = np.empty((times.size, dim), dtype=complex)
        psi = psi0.astype(complex)
        t_prev = 0.0
        for idx in order:
            t = times[idx]
            if t != t_prev:
                psi = sparse.linalg.expm_multiply((-1j * (t - t_prev)) * H, psi)
                t_prev = t
            states[idx] = psi
    return states.reshape(times.size, config.cutoff, 2)


def evolve(config: FockConfig, p) -> QuantumTrace:
    """Unitary evolution of |coherent> x |p> sampled every dt up to t_end.

    Checks unitarity (norm drift < 1e-8), energy conservation (relative drift
    < 1e-8) and cutoff containment (top-level occupation < 1e-6), raising
    CutoffReflection when the basis is too small for the horizon.
    """
    times = np.arange(0.0, config.t_end + 0.5 * config.dt, config.dt)
    psi0, tail = _initial_state(config, p)
    states = evolve_states(config, p, times)

    flat = states.reshape(times.size, -1)
    norms = np.linalg.norm(flat, axis=1)
    norm_drift = np.abs(norms - 1.0)

    H = build_hamiltonian(config)
    e0 = float(np.real(np.vdot(psi0, H @ psi0)))
    e_end = float(np.real(np.vdot(flat[-1], H @ flat[-1])))
    energy_drift = abs(e_end - e0) / max(1.0, abs(e0))

    # reduced qubit state rho[q,q'] = sum_n psi[n,q] conj(psi[n,q'])
    rho = np.einsum("tnq,tnr->tqr", states, states.conj())
    s1 = 2.0 * np.real(rho[:, 0, 1])
    s2 = -2.0 * np.imag(rho[:, 0, 1])
    s3 = np.real(rho[:, 0, 0] - rho[:, 1, 1])
    sigma = np.column_stack([s1, s2, s3])
    purity = np.real(np.einsum("tqr,trq->t", rho, rho))

    top = np.sum(np.abs(states[:, -1, :]) ** 2, axis=1)
    n = np.arange(config.cutoff)
    prob_n = np.sum(np.abs(states) ** 2, axis=2)
    photon = prob_n @ n
    field_a = np.einsum("tnq,n,tnq->t", states[:, :-1, :].conj(), np.sqrt(n[1:]), states[:, 1:, :])

    if np.max(norm_drift) > _NORM_TOL or np.max(top) > _TOP_OCCUPATION_TOL:
        raise CutoffReflection(
            f"norm drift {np.max(norm_drift):.2e} / top occupation {np.max(top):.2e} "
            f"exceed tolerances; raise the cutoff or shorten the horizon"
        )
    if energy_drift > _NORM_TOL:
        raise CutoffReflection(f"energy drift {energy_drift:.2e} exceeds {_NORM_TOL:.0e}")

    arrays = dict(
        times=times,
        sigma_expectations=sigma,
        purity=purity,
        norm_drift=norm_drift,
        top_occupation=top,
        field_a=field_a,
        photon_number=photon,
    )
    for arr in arrays.values():
        arr.setflags(write=False)
    return QuantumTrace(energy_drift=float(energy_drift), coherent_tail=float(tail), **arrays)


def _sigma_check(trace: QuantumTrace) -> None:
    if np.max(np.abs(np.linalg.norm(trace.sigma_expectations, axis=1))) > 1.0 + 1e-9:
        raise CutoffReflection("polarization left the unit ball")


def husimi(field_columns: np.ndarray, betas: np.ndarray) -> np.ndarray:
    """Husimi distribution Q(beta) of the reduced field state, up to rank 2.

    field_columns has shape (cutoff, r): the field vectors paired with each
    qubit basis state, so rho_field = sum_q c_q c_q^dag.  Overlaps <beta|n>
    are evaluated in log space.
    """
    nf = field_columns.shape[0]
    n = np.arange(nf)
    b = np.abs(betas).ravel()
    ang = np.angle(betas).ravel()
    safe = np.maximum(b, 1e-300)
    log_mag = -0.5 * b[:, None] ** 2 + n[None, :] * np.log(safe)[:, None] - 0.5 * gammaln(n + 1.0)[None, :]
    overlap = np.exp(log_mag) * np.exp(-1j * np.outer(ang, n))
    amps = overlap @ field_columns          # (B, r)
    q = np.sum(np.abs(amps) ** 2, axis=1) / np.pi
    return q.reshape(np.shape(betas))


def _window_halfwidth(state: np.ndarray, center: complex) -> float:
    """Half width covering both fragments: vacuum spread plus excess field spread."""
    nf = state.shape[0]
    n = np.arange(nf)
    amp = np.einsum("nq,n,nq->", state[:-1, :].conj(), np.sqrt(n[1:]), state[1:, :])
    nbar = np.real(np.einsum("nq,n,nq->", state.conj(), n, state))
    excess = max(0.0, nbar - abs(amp) ** 2, nbar - abs(center) ** 2)
    return 8.0 / np.sqrt(2.0) + 1.5 * np.sqrt(excess)


def fragment_analysis(config: FockConfig, p, times) -> FragmentAnalysis:
    """Locate the two field fragments on a rotating-frame Husimi grid.

    The grid (161 x 161) is centered on the freely rotating coherent center
    alpha exp(-i omega t), unwound by exp(+i omega t); its half width adapts
    to the measured field spread so separating fragments stay inside.  Peaks
    are local maxima above 1e-3 of the global maximum; masses come from
    splitting the plane along the perpendicular bisector of the two peaks.
    Raises PeaksUnresolved when fewer than two peaks exist or they are closer
    than 3 packet widths.
    """
    times = np.asarray(times, dtype=float)
    states = evolve_states(config, p, times)
    alpha = np.sqrt(config.n_bar)

    centers = np.empty((times.size, 2), dtype=complex)
    weights = np.empty((times.size, 2))
    separation = np.empty(times.size)

    for i, t in enumerate(times):
        state = states[i]
        rot = np.exp(-1j * config.omega * t)
        half = _window_halfwidth(state, alpha * rot)
        axis = np.linspace(-half, half, HUSIMI_GRID_POINTS)
        cell = axis[1] - axis[0]
        re, im = np.meshgrid(alpha + axis, axis)
        grid_rot = re + 1j * im              # rotating frame
        q = husimi(state, grid_rot * rot)    # evaluate in the lab frame

        peaks = _find_peaks(q)
        if len(peaks) < 2:
            raise PeaksUnresolved(f"single phase-space peak at t = {t}")
        (r0, c0), (r1, c1) = peaks[:2]
        p0 = grid_rot[r0, c0]
        p1 = grid_rot[r1, c1]
        if abs(p0 - p1) < 3.0 * _PACKET_WIDTH:
            raise PeaksUnresolved(
                f"peaks separated by {abs(p0 - p1):.2f} < 3 packet widths at t = {t}"
            )
        # watershed along the perpendicular bisector of the two peaks
        d0 = np.abs(grid_rot - p0)
        d1 = np.abs(grid_rot - p1)
        mask0 = d0 <= d1
        w = q * cell * cell
        m0, m1 = float(np.sum(w[mask0])), float(np.sum(w[~mask0]))
        c_0 = complex(np.sum(w[mask0] * grid_rot[mask0]) / m0)
        c_1 = complex(np.sum(w[~mask0] * grid_rot[~mask0]) / m1)
        # order by weight, heaviest first, for a deterministic layout
        if m1 > m0:
            (m0, m1), (c_0, c_1) = (m1, m0), (c_1, c_0)
        centers[i] = (c_0, c_1)
        weights[i] = (m0, m1)
        separation[i] = abs(c_0 - c_1)

    for arr in (times, centers, weights, separation):
        arr.setflags(write=False)
    return FragmentAnalysis(times=times, peak_centers=centers, peak_weights=weights, separation=separation)


def _find_peaks(q: np.ndarray) -> list[tuple[int, int]]:
    """Interior local maxima above the peak floor, strongest first."""
    floor = _PEAK_FLOOR * np.max(q)
    inner = q[1:-1, 1:-1]
    neighbors = np.stack(
        [
            q[:-2, 1:-1], q[2:, 1:-1], q[1:-1, :-2], q[1:-1, 2:],
            q[:-2, :-2], q[:-2, 2:], q[2:, :-2], q[2:, 2:],
        ]
    )
    is_peak = (inner >= neighbors.max(axis=0)) & (inner > floor)
    rows, cols = np.nonzero(is_peak)
    order = np.argsort(inner[rows, cols])[::-1]
    return [(int(rows[i]) + 1, int(cols[i]) + 1) for i in order]


def oscillation_envelope(times: np.ndarray, values: np.ndarray, period: float):
    """Oscillation amplitude (max - min)/2 over sliding windows of one period.

    Returns (window centers, amplitudes); used to extract collapse envelopes
    from exact traces without assuming their shape.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 3:
        raise ValidationError("need at least 3 samples for an envelope")
    dt = times[1] - times[0]
    win = max(2, int(round(period / dt)))
    starts = range(0, times.size - win, max(1, win // 2))
    centers = np.array([times[s : s + win].mean() for s in starts])
    amps = np.array([0.5 * (values[s : s + win].max() - values[s : s + win].min()) for s in starts])
    return centers, amps


def envelope_crossing_time(times, values, period, fraction=np.exp(-1.0)) -> float:
    """First time the oscillation envelope drops below fraction x its initial value."""
    centers, amps = oscillation_envelope(times, values, period)
    target = fraction * amps[0]
    below = np.nonzero(amps <= target)[0]
    if below.size == 0:
        raise ValidationError("envelope never crosses the requested fraction")
    j = int(below[0])
    if j == 0:
        return float(centers[0])
    t0, t1 = centers[j - 1], centers[j]
    a0, a1 = amps[j - 1], amps[j]
    return float(t0 + (a0 - target) * (t1 - t0) / (a0 - a1))
