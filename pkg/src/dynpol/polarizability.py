"""Complex dynamic dipole polarizabilities from vibronic line lists.

A solved system is flattened into a transition table (one row per final
level: transition energy, natural width, squared radial dipole, field
orientation). The polarizability is the damped sum over those rows,

    alpha(w) = 2 sum_f (w_f - i g_f/2) / ((w_f - i g_f/2)^2 - w^2) * d2_f,

evaluated separately for parallel (Sigma-Sigma) and perpendicular
(Sigma-Pi) rows and combined with rotational weight factors for a given
(J, M) or the isotropic average. The same kernel serves the atomic
reference model. Everything is in atomic units.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import units
from .curves import CurveError, TransitionDipoleCurve, read_table
from .vibsolver import VibrationalSolution, _channel_index, _dipole_values

# natural width used when none is configured: a 10 ns excited-state
# lifetime, i.e. 15 MHz
DEFAULT_GAMMA = 15.0e6 / units.HARTREE_HZ

# default scan resolution: 0.0125 cm^-1 (375 MHz)
DEFAULT_SCAN_STEP = 0.0125 / units.HARTREE_CM1

ORIENTATIONS = ("parallel", "perpendicular")


class PoleError(ArithmeticError):
    """Evaluation exactly on an undamped resonance (gamma = 0, w = w_f)."""


@dataclass(frozen=True)
class RotationalState:
    """(J, M) rotational sublevel, or the isotropic-average marker."""

    J: int = 0
    M: int = 0
    isotropic: bool = False

    def __post_init__(self):
        if self.isotropic:
            return
        if self.J < 0:
            raise ValueError(f"J must be >= 0, got {self.J}")
        if abs(self.M) > self.J:
            raise ValueError(f"|M| <= J required, got J={self.J}, M={self.M}")

    @classmethod
    def iso(cls) -> "RotationalState":
        return cls(isotropic=True)

    def __str__(self):
        return "isotropic" if self.isotropic else f"J{self.J}M{self.M}"


@dataclass(frozen=True)
class TransitionTable:
    """Flattened vibronic line list feeding the sum-over-states kernel."""

    omega: np.ndarray          # transition energies, hartree, > 0
    gamma: np.ndarray          # natural widths, hartree, >= 0
    d2: np.ndarray             # squared radial dipole matrix elements, a.u.
    orientation: np.ndarray    # "parallel" | "perpendicular" per row
    excited_label: np.ndarray
    v_f: np.ndarray

    def __post_init__(self):
        n = len(self.omega)
        for name in ("gamma", "d2", "orientation", "excited_label", "v_f"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has wrong length")
        if np.any(self.omega <= 0):
            raise ValueError("all transition energies must be > 0")
        if np.any(self.gamma < 0) or np.any(self.d2 < 0):
            raise ValueError("gamma and d2 must be >= 0")
        if np.any(np.diff(self.omega) < 0):
            raise ValueError("rows must be sorted by transition energy")

    @property
    def n_rows(self) -> int:
        return len(self.omega)

    def select(self, orientation: str) -> "TransitionTable":
        if orientation not in ORIENTATIONS:
            raise ValueError(f"unknown orientation {orientation!r}")
        m = self.orientation == orientation
        return TransitionTable(self.omega[m], self.gamma[m], self.d2[m],
                               self.orientation[m], self.excited_label[m],
                               self.v_f[m])


@dataclass(frozen=True)
class AtomicModel:
    """Atomic reference: valence line list plus constant core terms.

    alpha(w) = alpha_v(w) + alpha_core + alpha_core_valence, with alpha_v
    from the same damped sum-over-states kernel as the molecule. The core
    term is treated as frequency independent, valid far from core
    resonances.
    """

    omega: np.ndarray
    gamma: np.ndarray
    d2: np.ndarray
    alpha_core: float = 0.0
    alpha_core_valence: float = 0.0

    def __post_init__(self):
        if np.any(self.omega <= 0) or np.any(self.gamma < 0) or np.any(self.d2 < 0):
            raise ValueError("lines need omega > 0, gamma >= 0, d2 >= 0")


@dataclass(frozen=True)
class AtomPair:
    """Two far-separated ground-state atoms: alpha = 2 x atomic."""

    model: AtomicModel


@dataclass(frozen=True)
class PolarizabilitySpectrum:
    """Sampled complex alpha(w) with resonance-zone annotations."""

    omega: np.ndarray
    alpha: np.ndarray
    resonance_zones: tuple
    state_descriptor: str
    evaluator: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if np.any(np.diff(self.omega) <= 0):
            raise ValueError("omega grid must be strictly increasing")
        for lo, hi in self.resonance_zones:
            if lo > hi or lo < self.omega[0] or hi > self.omega[-1]:
                raise ValueError(f"resonance zone [{lo}, {hi}] outside grid span")

    @property
    def step(self) -> float:
        return float(self.omega[1] - self.omega[0])

    def in_zone(self, w: float, margin: float = 0.0) -> bool:
        return any(lo - margin <= w <= hi + margin for lo, hi in self.resonance_zones)


# ---------------------------------------------------------------------------
# Kernel
# ---------------------------------------------------------------------------

def _sos_sum(omega_if, gamma, d2, omega):
    """2 sum_f z_f / (z_f^2 - w^2) d2_f with z_f = w_f - i g_f / 2.

    `omega` may be a scalar or 1-d array; complex arithmetic is used exactly
    as written, with no rotating-wave simplification.
    """
    z = omega_if - 0.5j * gamma
    z2 = z * z
    w = np.asarray(omega, dtype=float)
    scalar = w.ndim == 0
    w2 = np.atleast_1d(w) ** 2
    out = np.empty(len(w2), dtype=complex)
    # chunk the (rows x frequencies) broadcast to bound memory
    chunk = max(1, int(4e6 / max(len(z), 1)))
    for s in range(0, len(w2), chunk):
        denom = z2[:, None] - w2[None, s:s + chunk]
        if np.any(denom == 0):
            raise PoleError("undamped resonance hit exactly: gamma=0 row at w=w_f")
        out[s:s + chunk] = 2.0 * np.einsum("f,fw->w", d2, z[:, None] / denom)
    return complex(out[0]) if scalar else out


def alpha_component(table: TransitionTable, orientation: str, omega) -> complex:
    """Polarizability component (parallel or perpendicular) at `omega` >= 0."""
    if np.any(np.asarray(omega) < 0):
        raise ValueError("omega must be >= 0")
    sub = table.select(orientation)
    if sub.n_rows == 0:
        return 0.0 + 0.0j if np.isscalar(omega) else np.zeros(len(omega), complex)
    return _sos_sum(sub.omega, sub.gamma, sub.d2, omega)


def rotational_weight_fractions(J: int, M: int) -> tuple[Fraction, Fraction]:
    """Exact (parallel, perpendicular) weights for a (J, M) sublevel.

    w_par  = (2J^2 + 2J - 1 - 2M^2) / ((2J+3)(2J-1))
    w_perp = (2J^2 + 2J - 2 + 2M^2) / ((2J+3)(2J-1))

    They sum to exactly 1; J = 0 gives (1/3, 2/3).
    """
    if J < 0 or abs(M) > J:
        raise ValueError(f"need J >= 0 and |M| <= J, got J={J}, M={M}")
    den = (2 * J + 3) * (2 * J - 1)
    return (Fraction(2 * J * J + 2 * J - 1 - 2 * M * M, den),
            Fraction(2 * J * J + 2 * J - 2 + 2 * M * M, den))


def rotational_weights(J: int, M: int) -> tuple[float, float]:
    wp, ww = rotational_weight_fractions(J, M)
    return float(wp), float(ww)


def alpha_rotational(table: TransitionTable, state: RotationalState, omega) -> complex:
    """Polarizability of a molecule in rotational sublevel `state`.

    Combines the parallel and perpendicular components with the (J, M)
    weight factors; the isotropic marker averages as (par + 2 perp) / 3,
    which also equals the statistical M-average within any J manifold.
    """
    a_par = alpha_component(table, "parallel", omega)
    a_perp = alpha_component(table, "perpendicular", omega)
    if state.isotropic:
        return (a_par + 2.0 * a_perp) / 3.0
    w_par, w_perp = rotational_weights(state.J, state.M)
    return w_par * a_par + w_perp * a_perp


def alpha_atomic(model: AtomicModel, omega) -> complex:
    """Atomic polarizability: valence sum-over-states plus core constants."""
    if np.any(np.asarray(omega) < 0):
        raise ValueError("omega must be >= 0")
    core = model.alpha_core + model.alpha_core_valence
    return _sos_sum(model.omega, model.gamma, model.d2, omega) + core


def alpha_valence(model: AtomicModel, omega) -> complex:
    """Valence-only part of the atomic polarizability."""
    return _sos_sum(model.omega, model.gamma, model.d2, omega)


def pair_alpha(model: AtomicModel, omega) -> complex:
    """Polarizability of two far-separated atoms: exactly twice the atomic one."""
    return 2.0 * alpha_atomic(model, omega)


# ---------------------------------------------------------------------------
# Table construction
# ---------------------------------------------------------------------------

def build_table(initial, excited_systems, cutoff: float = 0.0,
                gamma=None, include_continuum: bool = False) -> TransitionTable:
    """Flatten solved excited systems into a transition table.

    Parameters
    ----------
    initial : (VibrationalSolution, int)
        Initial-state solution and vibrational index v_i. All curve files
        entering the solves must share one absolute energy origin.
    excited_systems : sequence of (VibrationalSolution, TransitionDipoleCurve)
        Each dipole links the initial electronic state to one channel of
        its excited solution (matched by label); its orientation must be
        consistent with the Lambda values of the two states.
    cutoff : float
        Rows with squared dipole below this floor are dropped.
    gamma : float or dict or None
        Natural width (hartree) per excited label; a bare float applies to
        all, None applies the 10 ns default. Missing dict entries fall back
        to the default.
    include_continuum : bool
        Keep box-discretized levels above the excited dissociation limit.
        Off by default; needed for closure/sum-rule checks.

    Notes
    -----
    Rows with non-positive transition energy (final level below the initial
    one) cannot enter the table and are dropped.
    """
    sol_i, v_i = initial
    if not 0 <= v_i < sol_i.n_levels:
        raise IndexError(f"v_i={v_i} out of range (0..{sol_i.n_levels - 1})")
    e_i = float(sol_i.energies[v_i])

    rows_w, rows_g, rows_d2, rows_or, rows_lab, rows_vf = [], [], [], [], [], []
    for sol_f, dipole in excited_systems:
        if not isinstance(dipole, TransitionDipoleCurve):
            raise TypeError("each excited system needs a TransitionDipoleCurve")
        if abs(sol_f.mu - sol_i.mu) > 1e-9 * sol_i.mu:
            raise ValueError("all solutions must share the reduced mass")
        ci = _channel_index(sol_i, dipole.from_label, "from")
        cf = _channel_index(sol_f, dipole.to_label, "to")
        dlam = abs(sol_i.channel_lams[ci] - sol_f.channel_lams[cf])
        expected = "parallel" if dlam == 0 else "perpendicular"
        if dlam > 1 or dipole.orientation != expected:
            raise CurveError(
                f"dipole {dipole.from_label}->{dipole.to_label} tagged "
                f"{dipole.orientation!r} but |d Lambda|={dlam} implies {expected!r}")
        g = _gamma_for(gamma, dipole.to_label)

        tdms = _all_tdms(sol_i, v_i, ci, dipole, sol_f, cf)
        for vf in range(sol_f.n_levels):
            e_f = float(sol_f.energies[vf])
            if not include_continuum and e_f >= sol_f.threshold:
                continue
            w_if = e_f - e_i
            d2 = tdms[vf] ** 2
            if w_if <= 0.0 or d2 < cutoff:
                continue
            rows_w.append(w_if)
            rows_g.append(g)
            rows_d2.append(d2)
            rows_or.append(dipole.orientation)
            rows_lab.append(dipole.to_label)
            rows_vf.append(vf)

    order = np.argsort(np.asarray(rows_w)) if rows_w else np.array([], dtype=int)
    return TransitionTable(
        omega=np.asarray(rows_w, dtype=float)[order],
        gamma=np.asarray(rows_g, dtype=float)[order],
        d2=np.asarray(rows_d2, dtype=float)[order],
        orientation=np.asarray(rows_or, dtype=object)[order]
        if rows_w else np.asarray([], dtype=object),
        excited_label=np.asarray(rows_lab, dtype=object)[order]
        if rows_w else np.asarray([], dtype=object),
        v_f=np.asarray(rows_vf, dtype=int)[order],
    )


def _gamma_for(gamma, label: str) -> float:
    if gamma is None:
        return DEFAULT_GAMMA
    if isinstance(gamma, dict):
        return float(gamma.get(label, DEFAULT_GAMMA))
    return float(gamma)


def _all_tdms(sol_i, v_i, ci, dipole, sol_f, cf) -> np.ndarray:
    """<v_i| d |v_f> for every final level at once (same math as vibronic_tdm)."""
    gi, gf = sol_i.grid, sol_f.grid
    psi_i = sol_i.wavefunctions[v_i, ci]
    if gi is gf or (gi.N == gf.N and np.array_equal(gi.R, gf.R)):
        y = psi_i * _dipole_values(dipole, gi.R) * gi.weights
        return sol_f.wavefunctions[:, cf, :] @ y
    if gi.N >= gf.N:
        from .vibsolver import _resample
        y = psi_i * _dipole_values(dipole, gi.R) * gi.weights
        out = np.empty(sol_f.n_levels)
        for vf in range(sol_f.n_levels):
            out[vf] = np.dot(_resample(gf.R, sol_f.wavefunctions[vf, cf], gi.R), y)
        return out
    from .vibsolver import _resample
    psi_i_dense = _resample(gi.R, psi_i, gf.R)
    y = psi_i_dense * _dipole_values(dipole, gf.R) * gf.weights
    return sol_f.wavefunctions[:, cf, :] @ y


# ---------------------------------------------------------------------------
# Frequency scans
# ---------------------------------------------------------------------------

def scan(source, state, omega_lo: float, omega_hi: float,
         step: float = DEFAULT_SCAN_STEP, zone_factor: float = 10.0,
         max_points: int = 10 ** 8) -> PolarizabilitySpectrum:
    """Sample alpha(w) on a dense grid and annotate resonance zones.

    Parameters
    ----------
    source : TransitionTable or AtomicModel or AtomPair
        What to evaluate; tables are combined with the rotational `state`
        (ignored for atomic sources).
    omega_lo, omega_hi, step : float
        Scan window and resolution in hartree; `step` defaults to the
        0.0125 cm^-1 standard resolution.

    Notes
    -----
    Points where |Im alpha| exceeds `zone_factor` times the median |Im alpha|
    of the scan are flagged resonant; contiguous runs are merged into
    intervals padded by half a step (clipped to the grid span). Evaluation
    order is fixed, so repeated scans are bit-identical.
    """
    if not omega_lo < omega_hi:
        raise ValueError("omega_lo must be < omega_hi")
    if step <= 0:
        raise ValueError("step must be > 0")
    n = int(np.floor((omega_hi - omega_lo) / step)) + 1
    if n > max_points:
        raise ValueError(
            f"scan would need {n} points (> {max_points}); widen the step, "
            "narrow the window, or raise max_points")
    grid = omega_lo + step * np.arange(n)

    evaluator, descriptor = _make_evaluator(source, state)
    alpha = evaluator(grid)

    im = np.abs(alpha.imag)
    med = float(np.median(im))
    # med == 0 means an undamped table: only strictly nonzero Im is resonant
    mask = im > zone_factor * med if med > 0 else im > 0
    zones = []
    i = 0
    while i < n:
        if mask[i]:
            j = i
            while j + 1 < n and mask[j + 1]:
                j += 1
            lo = max(grid[i] - 0.5 * step, grid[0])
            hi = min(grid[j] + 0.5 * step, grid[-1])
            zones.append((float(lo), float(hi)))
            i = j + 1
        else:
            i += 1

    return PolarizabilitySpectrum(
        omega=grid, alpha=alpha, resonance_zones=tuple(zones),
        state_descriptor=descriptor, evaluator=evaluator)


def _make_evaluator(source, state):
    if isinstance(source, TransitionTable):
        if state is None:
            state = RotationalState.iso()
        return (lambda w: np.atleast_1d(alpha_rotational(source, state, w)),
                f"molecule[{state}]")
    if isinstance(source, AtomicModel):
        return (lambda w: np.atleast_1d(alpha_atomic(source, w)), "atom")
    if isinstance(source, AtomPair):
        return (lambda w: np.atleast_1d(pair_alpha(source.model, w)), "atom_pair")
    raise TypeError(f"cannot scan a {type(source).__name__}")


def write_spectrum(spectrum: PolarizabilitySpectrum, path):
    """Export: omega_cm1, re_alpha_au, im_alpha_au, in_resonance_zone rows."""
    in_zone = np.zeros(len(spectrum.omega))
    for lo, hi in spectrum.resonance_zones:
        in_zone[(spectrum.omega >= lo) & (spectrum.omega <= hi)] = 1.0
    om_cm1 = spectrum.omega * units.HARTREE_CM1
    header = {
        "kind": "spectrum",
        "state": spectrum.state_descriptor,
        "columns": "omega_cm1,re_alpha_au,im_alpha_au,in_resonance_zone",
        "omega_lo_cm1": repr(float(om_cm1[0])),
        "omega_hi_cm1": repr(float(om_cm1[-1])),
        "step_cm1": repr(float(spectrum.step * units.HARTREE_CM1)),
    }
    data = np.column_stack([om_cm1, spectrum.alpha.real, spectrum.alpha.imag, in_zone])
    from .curves import write_table
    write_table(path, header, data)


def load_atomic_model(path) -> AtomicModel:
    """Read an atomic line list (container format, kind=atomic_lines).

    Columns are omega, d2 and optionally gamma; units come from the header
    keys unit_omega (default cm-1), unit_gamma (default MHz). The constant
    core terms are the header keys alpha_core / alpha_core_valence (a.u.).
    """
    header, data, _ = read_table(path)
    if header.get("kind") != "atomic_lines":
        raise CurveError(f"{path}: expected kind=atomic_lines, got {header.get('kind')!r}")
    unit_omega = header.get("unit_omega", "cm-1")
    unit_gamma = header.get("unit_gamma", "MHz")
    omega = np.array([units.energy_to_au(v, unit_omega) for v in data[:, 0]])
    d2 = data[:, 1].astype(float)
    if data.shape[1] > 2:
        g_hz = np.array([units.convert(units.Quantity(v, "frequency", unit_gamma), "Hz").value
                         for v in data[:, 2]])
        gamma = g_hz / units.HARTREE_HZ
    else:
        gamma = np.zeros_like(omega)
    order = np.argsort(omega)
    return AtomicModel(
        omega=omega[order], gamma=gamma[order], d2=d2[order],
        alpha_core=float(header.get("alpha_core", 0.0)),
        alpha_core_valence=float(header.get("alpha_cv", 0.0)),
    )
