"""Vibrational eigensolver on an adaptively mapped radial grid.

The radial Schrödinger equation is discretized with a Fourier/sinc
collocation stencil on a grid whose local spacing follows the de Broglie
wavelength at a chosen envelope energy, so steep wells and shallow
long-range tails are resolved with comparable point counts. The kinetic
operator is assembled as an explicitly symmetric product with the mapping
jacobian, which guarantees real eigenvalues and exactly orthonormal grid
wavefunctions. Two electronic channels can be solved together with an
R-dependent off-diagonal coupling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .curves import (CurveError, PotentialCurve, SpinOrbitFunction,
                     TransitionDipoleCurve, write_table)

DEFAULT_BETA = 1.4


class SolverError(RuntimeError):
    """Internal consistency failure (e.g. non-symmetric assembled Hamiltonian)."""


@dataclass(frozen=True)
class MappedGrid:
    """Radial grid with per-point mapping jacobian.

    Attributes
    ----------
    R : ndarray
        Grid points in bohr, strictly increasing.
    jacobian : ndarray
        dR/dx of the mapping at each point (> 0).
    dx : float
        Uniform spacing of the underlying mapped coordinate.
    envelope_energy : float
        Kinetic cutoff (hartree) used to build the mapping.
    mu : float
        Reduced mass (electron masses) the spacing law was evaluated with.
    notes : tuple of str
        Construction flags (e.g. inner-wall extrapolation).
    """

    R: np.ndarray
    jacobian: np.ndarray
    dx: float
    envelope_energy: float
    mu: float
    notes: tuple = ()

    @property
    def N(self) -> int:
        return len(self.R)

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights: integral f(R) dR ~ sum f(R_i) w_i."""
        return self.jacobian * self.dx


@dataclass(frozen=True)
class VibrationalSolution:
    """Eigenpairs of one (possibly two-channel) radial system.

    `wavefunctions[v, c, i]` is the channel-c amplitude of level v at grid
    point i, normalized so sum_c sum_i psi^2 w_i = 1 with the grid weights.
    Box-discretized continuum levels (energies above `threshold`) are kept;
    `bound_count` tells how many levels are truly bound.
    """

    grid: MappedGrid
    energies: np.ndarray
    wavefunctions: np.ndarray        # (nlev, nchan, N)
    channel_fractions: np.ndarray    # (nlev, nchan)
    bound_count: int
    channel_labels: tuple
    channel_lams: tuple
    threshold: float
    mu: float

    @property
    def n_levels(self) -> int:
        return len(self.energies)

    @property
    def n_channels(self) -> int:
        return self.wavefunctions.shape[1]

    def psi(self, v: int) -> np.ndarray:
        """Channel-resolved wavefunction of level v, shape (nchan, N)."""
        if not 0 <= v < self.n_levels:
            raise IndexError(f"level {v} out of range (0..{self.n_levels - 1})")
        return self.wavefunctions[v]


# ---------------------------------------------------------------------------
# Grid construction
# ---------------------------------------------------------------------------

def _as_curve_list(potentials):
    if isinstance(potentials, PotentialCurve):
        return [potentials]
    pots = list(potentials)
    if not 1 <= len(pots) <= 2:
        raise ValueError("build_grid takes one or two potentials")
    return pots


def _inner_wall_extension(R, V, target):
    """Exponential inward extrapolation from the innermost three samples.

    Returns (R_ext, V_ext) of prepended points, or empty arrays when the
    tabulated wall already reaches `target`.
    """
    if V[0] >= target:
        return np.array([]), np.array([])
    vmin = float(np.min(V))
    u0, u2 = V[0] - vmin, V[2] - vmin
    h = R[1] - R[0]
    if u0 > u2 > 0:
        b = np.log(u0 / u2) / (R[2] - R[0])
    else:
        b = 0.0
    pts_R, pts_V = [], []
    r, v = R[0], V[0]
    while v < target and len(pts_R) < 500:
        r -= h
        if b > 0:
            v = vmin + u0 * np.exp(b * (R[0] - r))
        else:
            # wall too flat to fit an exponential: steep linear fallback
            v = v + (V[1] - V[0]) if V[0] > V[1] else v + (target - vmin) * 0.1
        if r <= 0.05:
            break
        pts_R.append(r)
        pts_V.append(v)
    return np.array(pts_R[::-1]), np.array(pts_V[::-1])


def build_grid(potentials, e_max: float, mu: float, beta: float = DEFAULT_BETA,
               e_floor: float = 1e-6, margin_in: float = 1.0,
               margin_out: float = 2.0, n_dense: int = 32769) -> MappedGrid:
    """Build a mapped grid for one or two potentials.

    The local spacing follows

        h(R) = pi / (beta * sqrt(2 mu max(e_max - V_env(R), e_floor)))

    i.e. half the local de Broglie wavelength at the envelope energy divided
    by the oversampling factor beta >= 1, where V_env is the pointwise
    minimum of the input potentials. The grid spans the classically allowed
    region at `e_max` plus tunneling margins. If the tabulated inner wall
    does not rise above the envelope, it is extended inward by an
    exponential fit through the innermost three samples and the grid is
    flagged accordingly.

    Parameters
    ----------
    potentials : PotentialCurve or sequence of one/two PotentialCurve
    e_max : float
        Envelope energy (hartree); must exceed at least one potential minimum.
    mu : float
        Reduced mass in electron masses.
    beta : float
        Oversampling factor; the point count scales linearly with it.
    """
    pots = _as_curve_list(potentials)
    if beta < 1.0:
        raise ValueError(f"beta must be >= 1, got {beta}")
    if mu <= 0:
        raise ValueError(f"mu must be > 0, got {mu}")

    r_lo = max(p.rmin for p in pots)
    r_hi = min(p.rmax for p in pots)
    if r_lo >= r_hi:
        raise CurveError("potentials have no overlapping R range")

    dense = np.linspace(r_lo, r_hi, n_dense)
    v_env = np.min([p.spline()(dense) for p in pots], axis=0)
    v_min = float(np.min(v_env))
    if e_max <= v_min:
        raise ValueError(f"e_max={e_max} is below every potential minimum ({v_min})")

    notes = ()
    wall_target = e_max + 0.25 * (e_max - v_min)
    R_in, V_in = _inner_wall_extension(dense, v_env, wall_target)
    if len(R_in):
        dense = np.concatenate([R_in, dense])
        v_env = np.concatenate([V_in, v_env])
        notes = ("inner_wall_extrapolated",)

    allowed = v_env <= e_max
    i_first = int(np.argmax(allowed))
    i_last = len(allowed) - 1 - int(np.argmax(allowed[::-1]))
    r_start = max(dense[i_first] - margin_in, dense[0])
    r_stop = min(dense[i_last] + margin_out, dense[-1])

    sel = (dense >= r_start) & (dense <= r_stop)
    Rd = dense[sel]
    Vd = v_env[sel]

    h = np.pi / (beta * np.sqrt(2.0 * mu * np.maximum(e_max - Vd, e_floor)))
    x = np.concatenate([[0.0], np.cumsum(0.5 * (1.0 / h[1:] + 1.0 / h[:-1]) * np.diff(Rd))])
    x_tot = float(x[-1])
    n = int(np.ceil(x_tot)) + 1
    if n < 8:
        n = 8
    xi = np.linspace(0.0, x_tot, n)
    Ri = np.interp(xi, x, Rd)
    ji = np.interp(Ri, Rd, h)
    return MappedGrid(R=Ri, jacobian=ji, dx=x_tot / (n - 1),
                      envelope_energy=e_max, mu=mu, notes=notes)


# ---------------------------------------------------------------------------
# Hamiltonian assembly and diagonalization
# ---------------------------------------------------------------------------

def _derivative_matrix(n: int, dx: float) -> np.ndarray:
    """Antisymmetric sinc-collocation first-derivative matrix."""
    idx = np.arange(n)
    dij = idx[:, None] - idx[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        D = np.where(dij == 0, 0.0, (-1.0) ** dij / (dx * np.where(dij == 0, 1, dij)))
    return D


def kinetic_matrix(grid: MappedGrid, mu: float) -> np.ndarray:
    """Symmetric kinetic-energy matrix on the mapped grid.

    Assembled as T = (D S)^T diag(1/J) (D S) / (2 mu) with S = diag(1/sqrt(J))
    and D the sinc first-derivative stencil; manifestly symmetric positive
    semidefinite for any jacobian.
    """
    D = _derivative_matrix(grid.N, grid.dx)
    s = 1.0 / np.sqrt(grid.jacobian)
    A = D * s[None, :]
    T = (A.T * (1.0 / grid.jacobian)[None, :]) @ A
    T /= 2.0 * mu
    return 0.5 * (T + T.T)


def _potential_on_grid(potential: PotentialCurve, grid: MappedGrid) -> np.ndarray:
    s = potential.spline()
    R = grid.R
    out = np.empty_like(R)
    inside = (R >= potential.rmin) & (R <= potential.rmax)
    out[inside] = s(R[inside])
    # Grid points created by inner-wall extrapolation sit below the tabulated
    # range: continue the wall with the same exponential rule.
    n_out = int(np.count_nonzero(~inside))
    if n_out:
        if np.any(R[~inside] > potential.rmax):
            raise CurveError(f"grid extends beyond potential {potential.label!r} "
                             f"outer range {potential.rmax}")
        vmin = float(np.min(potential.V))
        u0, u2 = potential.V[0] - vmin, potential.V[2] - vmin
        b = np.log(u0 / u2) / (potential.R[2] - potential.R[0]) if u0 > u2 > 0 else 0.0
        r_out = R[~inside]
        if b > 0:
            out[~inside] = vmin + u0 * np.exp(b * (potential.R[0] - r_out))
        else:
            out[~inside] = potential.V[0]
    return out


def _check_symmetric(H: np.ndarray):
    scale = max(float(np.abs(H).max()), 1.0)
    if float(np.abs(H - H.T).max()) > 1e-12 * scale:
        raise SolverError("assembled Hamiltonian is not symmetric")


def _sign_fix(psi_rows: np.ndarray) -> np.ndarray:
    # make the first significant lobe positive, level by level
    out = psi_rows.copy()
    for k in range(out.shape[0]):
        flat = out[k].reshape(-1)
        big = np.abs(flat) > 0.05 * np.abs(flat).max()
        if np.any(big) and flat[np.argmax(big)] < 0:
            out[k] = -out[k]
    return out


def solve_single(potential: PotentialCurve, mu: float, grid: MappedGrid,
                 e_cut: float | None = None) -> VibrationalSolution:
    """Diagonalize one electronic state on a mapped grid.

    Parameters
    ----------
    potential : PotentialCurve
        Must cover the grid (inner-wall extrapolation points excepted).
    mu : float
        Reduced mass in electron masses.
    grid : MappedGrid
        Grid built for this potential (or for an envelope containing it).
    e_cut : float, optional
        Keep eigenpairs with E <= e_cut; defaults to the grid envelope
        energy. Pass ``numpy.inf`` to keep the complete discrete spectrum
        (needed for closure/sum-rule work).

    Returns
    -------
    VibrationalSolution
        Energies ascending; wavefunctions orthonormal under the grid
        quadrature and sign-fixed to a positive first lobe. An empty
        solution (no levels under `e_cut`) is not an error.
    """
    if mu <= 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    V = _potential_on_grid(potential, grid)
    H = kinetic_matrix(grid, mu) + np.diag(V)
    _check_symmetric(H)
    evals, evecs = eigh(H)

    cut = grid.envelope_energy if e_cut is None else e_cut
    keep = evals <= cut
    evals = evals[keep]
    phi = evecs[:, keep].T                      # (nlev, N), sum phi^2 = 1
    psi = phi / np.sqrt(grid.weights)[None, :]  # values of psi(R_i)
    psi = _sign_fix(psi)[:, None, :]            # (nlev, 1, N)

    return VibrationalSolution(
        grid=grid,
        energies=evals,
        wavefunctions=psi,
        channel_fractions=np.ones((len(evals), 1)),
        bound_count=int(np.count_nonzero(evals < potential.dissociation_energy)),
        channel_labels=(potential.label,),
        channel_lams=(potential.lam,),
        threshold=potential.dissociation_energy,
        mu=mu,
    )


def solve_coupled(pot_a: PotentialCurve, pot_b: PotentialCurve,
                  so: SpinOrbitFunction, mu: float, grid: MappedGrid,
                  e_cut: float | None = None) -> VibrationalSolution:
    """Diagonalize two electronic states coupled by W_SO(R).

    The 2N x 2N Hamiltonian is [[T + V_a, W], [W, T + V_b]] with W diagonal
    in R. Per-level channel weights are reported; degenerate levels are
    ordered by descending weight of the first channel. The adiabatic
    (avoided-crossing) picture is available separately through
    :func:`adiabatic_curves` as a diagnostic -- the computation itself is
    done in this diabatic basis.
    """
    if mu <= 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    # The coupling must reach the grid's outer edge; on the inner wall
    # (extrapolation zone) it is clamped to its innermost tabulated value.
    if so.R[-1] < grid.R[-1]:
        raise CurveError("spin-orbit function does not cover the grid")
    V_a = _potential_on_grid(pot_a, grid)
    V_b = _potential_on_grid(pot_b, grid)
    W = so.spline()(np.clip(grid.R, so.R[0], so.R[-1]))

    T = kinetic_matrix(grid, mu)
    n = grid.N
    H = np.zeros((2 * n, 2 * n))
    H[:n, :n] = T + np.diag(V_a)
    H[n:, n:] = T + np.diag(V_b)
    H[:n, n:] = np.diag(W)
    H[n:, :n] = np.diag(W)
    _check_symmetric(H)
    evals, evecs = eigh(H)

    cut = grid.envelope_energy if e_cut is None else e_cut
    keep = evals <= cut
    evals = evals[keep]
    phi = evecs[:, keep].T.reshape(-1, 2, n)    # (nlev, 2, N)

    frac = np.sum(phi ** 2, axis=2)
    if len(evals):
        frac = frac / frac.sum(axis=1, keepdims=True)

    # ascending energy; exact degeneracies broken by channel-1 weight, descending
    order = np.lexsort((-frac[:, 0], evals))
    evals, phi, frac = evals[order], phi[order], frac[order]

    psi = _sign_fix(phi / np.sqrt(grid.weights)[None, None, :])
    threshold = min(pot_a.dissociation_energy, pot_b.dissociation_energy)

    return VibrationalSolution(
        grid=grid,
        energies=evals,
        wavefunctions=psi,
        channel_fractions=frac,
        bound_count=int(np.count_nonzero(evals < threshold)),
        channel_labels=(pot_a.label, pot_b.label),
        channel_lams=(pot_a.lam, pot_b.lam),
        threshold=threshold,
        mu=mu,
    )


def adiabatic_curves(pot_a: PotentialCurve, pot_b: PotentialCurve,
                     so: SpinOrbitFunction, R) -> tuple[np.ndarray, np.ndarray]:
    """Lower/upper adiabatic potentials of the coupled pair at points R.

    Pointwise 2x2 diagonalization of [[V_a, W], [W, V_b]]; diagnostic only.
    """
    R = np.asarray(R, dtype=float)
    v_a = pot_a.spline()(R)
    v_b = pot_b.spline()(R)
    w = so.spline()(np.clip(R, so.R[0], so.R[-1]))
    mean = 0.5 * (v_a + v_b)
    gap = np.sqrt(0.25 * (v_a - v_b) ** 2 + w ** 2)
    return mean - gap, mean + gap


# ---------------------------------------------------------------------------
# Vibronic transition dipole integrals
# ---------------------------------------------------------------------------

def _channel_index(sol: VibrationalSolution, label: str, role: str) -> int:
    if sol.n_channels == 1:
        return 0
    try:
        return sol.channel_labels.index(label)
    except ValueError:
        raise CurveError(
            f"dipole {role} label {label!r} matches no channel of "
            f"{sol.channel_labels}") from None


def _dipole_values(dipole: TransitionDipoleCurve, R: np.ndarray) -> np.ndarray:
    # constant continuation beyond the tabulated dipole range (the physical
    # dipole levels off to its asymptotic atomic value)
    return dipole.spline()(np.clip(R, dipole.R[0], dipole.R[-1]))


def vibronic_tdm(sol_i: VibrationalSolution, v_i: int,
                 dipole: TransitionDipoleCurve,
                 sol_f: VibrationalSolution, v_f: int) -> float:
    """Radial matrix element <v_i| d(R) |v_f> by grid quadrature.

    For coupled solutions the dipole is contracted against the channel
    whose label matches the dipole's from/to label. When the two solutions
    live on different grids, the sparser wavefunction is resampled onto
    the denser grid with a cubic spline (zero outside its own span) and
    the denser grid's jacobian weights are used.
    """
    if not 0 <= v_i < sol_i.n_levels:
        raise IndexError(f"v_i={v_i} out of range (0..{sol_i.n_levels - 1})")
    if not 0 <= v_f < sol_f.n_levels:
        raise IndexError(f"v_f={v_f} out of range (0..{sol_f.n_levels - 1})")
    ci = _channel_index(sol_i, dipole.from_label, "from")
    cf = _channel_index(sol_f, dipole.to_label, "to")

    gi, gf = sol_i.grid, sol_f.grid
    psi_i = sol_i.wavefunctions[v_i, ci]
    psi_f = sol_f.wavefunctions[v_f, cf]
    if gi is gf or (gi.N == gf.N and np.array_equal(gi.R, gf.R)):
        R, w = gi.R, gi.weights
    elif gi.N >= gf.N:
        R, w = gi.R, gi.weights
        psi_f = _resample(gf.R, psi_f, R)
    else:
        R, w = gf.R, gf.weights
        psi_i = _resample(gi.R, psi_i, R)
    return float(np.sum(psi_i * _dipole_values(dipole, R) * psi_f * w))


def _resample(R_from: np.ndarray, psi: np.ndarray, R_to: np.ndarray) -> np.ndarray:
    from scipy.interpolate import CubicSpline
    s = CubicSpline(R_from, psi, bc_type="natural")
    out = np.zeros_like(R_to)
    inside = (R_to >= R_from[0]) & (R_to <= R_from[-1])
    out[inside] = s(R_to[inside])
    return out


# ---------------------------------------------------------------------------
# Offline inspection dumps
# ---------------------------------------------------------------------------

def save_levels(sol: VibrationalSolution, path):
    """Dump the level table (v, E, bound flag, channel fractions)."""
    header = {
        "kind": "levels",
        "labels": "+".join(sol.channel_labels),
        "unit_E": "hartree",
        "bound_count": sol.bound_count,
        "threshold": repr(sol.threshold),
    }
    cols = [np.arange(sol.n_levels), sol.energies,
            (sol.energies < sol.threshold).astype(float)]
    for c in range(sol.n_channels):
        cols.append(sol.channel_fractions[:, c])
    write_table(path, header, np.column_stack(cols))


def save_wavefunctions(sol: VibrationalSolution, path, levels):
    """Dump psi(R) for selected levels (summed channels stacked per column)."""
    header = {
        "kind": "wavefunctions",
        "labels": "+".join(sol.channel_labels),
        "levels": ",".join(str(v) for v in levels),
        "unit_R": "bohr",
    }
    cols = [sol.grid.R]
    for v in levels:
        for c in range(sol.n_channels):
            cols.append(sol.wavefunctions[v, c])
    write_table(path, header, np.column_stack(cols))
