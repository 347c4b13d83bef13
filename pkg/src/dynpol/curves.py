"""Tabulated molecular curves: potentials, transition dipoles, spin-orbit coupling.

Curves live in a small delimiter-separated container format. Header lines
start with ``#`` and carry ``key=value`` pairs (at minimum the kind, labels
and units); the body is numeric rows. All loaded data is converted to
atomic units (bohr, hartree) and is immutable afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import CubicSpline

from . import units

MIN_SAMPLES = 8

# Header keys recognized per schema; `unit_*` entries name the column units.
_POTENTIAL_KEYS = ("kind", "label", "lambda", "spin", "parity", "unit_R", "unit_V")


class CurveError(ValueError):
    """Invalid curve data (ordering, NaN, missing samples, bad window...)."""


class CurveFormatError(CurveError):
    """Parse failure; carries the 1-based line number when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = f"{path}:{line}: " if line is not None else (f"{path}: " if path else "")
        super().__init__(where + message)


@dataclass(frozen=True)
class PotentialCurve:
    """One electronic state's potential energy vs internuclear distance.

    Attributes
    ----------
    label : str
        State label, e.g. "X", "A", "b".
    lam : int
        Projection Lambda of electronic angular momentum: 0 (Sigma) or 1 (Pi).
    spin : str
        "singlet" or "triplet".
    gerade : str
        Inversion parity, "g" or "u".
    R : ndarray
        Internuclear distances, bohr, strictly increasing.
    V : ndarray
        Potential values, hartree.
    dissociation_energy : float
        Asymptotic value of V (hartree); levels below it are bound.
    long_range : dict or None
        {n: Cn} coefficients attached by :func:`extend_long_range`.
    notes : tuple of str
        Warnings accumulated by curve-building operations.
    """

    label: str
    lam: int
    spin: str
    gerade: str
    R: np.ndarray
    V: np.ndarray
    dissociation_energy: float
    long_range: dict | None = None
    notes: tuple = ()

    def __post_init__(self):
        _validate_samples(self.R, self.V)
        if self.lam not in (0, 1):
            raise CurveError(f"lambda must be 0 (Sigma) or 1 (Pi), got {self.lam}")

    @property
    def rmin(self) -> float:
        return float(self.R[0])

    @property
    def rmax(self) -> float:
        return float(self.R[-1])

    def spline(self) -> CubicSpline:
        return _spline_cached(self)

    def __call__(self, r):
        return interpolate(self, r)

    def minimum(self) -> tuple[float, float]:
        """(R_e, V_min) of the tabulated well, refined on the spline."""
        i = int(np.argmin(self.V))
        lo = self.R[max(i - 1, 0)]
        hi = self.R[min(i + 1, len(self.R) - 1)]
        s = self.spline()
        grid = np.linspace(lo, hi, 2001)
        v = s(grid)
        j = int(np.argmin(v))
        return float(grid[j]), float(v[j])


@dataclass(frozen=True)
class TransitionDipoleCurve:
    """R-dependent electronic transition dipole between two states."""

    from_label: str
    to_label: str
    orientation: str  # "parallel" (Sigma-Sigma) or "perpendicular" (Sigma-Pi)
    R: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        _validate_samples(self.R, self.d)
        if self.orientation not in ("parallel", "perpendicular"):
            raise CurveError(f"orientation must be parallel|perpendicular, got {self.orientation!r}")

    def spline(self) -> CubicSpline:
        return _spline_cached(self)

    def __call__(self, r):
        return interpolate(self, r)


@dataclass(frozen=True)
class SpinOrbitFunction:
    """R-dependent spin-orbit coupling W_SO(R), hartree."""

    R: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        _validate_samples(self.R, self.W)
        # The coupling must level off toward its atomic asymptote: the last
        # tenth of the grid may not swing by more than 10% of the full range.
        n = len(self.R)
        tail = self.W[max(n - max(n // 10, 2), 0):]
        span = float(np.max(self.W) - np.min(self.W))
        if span > 0 and float(np.max(tail) - np.min(tail)) > 0.1 * span:
            raise CurveError("spin-orbit function does not approach a constant "
                             "within the last 10% of the grid")

    def spline(self) -> CubicSpline:
        return _spline_cached(self)

    def __call__(self, r):
        return interpolate(self, r)


def _validate_samples(R, values):
    R = np.asarray(R)
    values = np.asarray(values)
    if R.ndim != 1 or values.shape != R.shape:
        raise CurveError("R and values must be 1-d arrays of equal length")
    if len(R) < MIN_SAMPLES:
        raise CurveError(f"need at least {MIN_SAMPLES} samples, got {len(R)}")
    if np.any(~np.isfinite(R)) or np.any(~np.isfinite(values)):
        raise CurveError("NaN/inf in curve data")
    dr = np.diff(R)
    if np.any(dr <= 0):
        i = int(np.argmax(dr <= 0))
        raise CurveError(f"R must be strictly increasing; violated at sample {i + 1} "
                         f"(R={R[i + 1]!r} after R={R[i]!r})")


def _spline_cached(curve) -> CubicSpline:
    # Lazily built once per (immutable) curve; stored on the instance.
    s = getattr(curve, "_spline", None)
    if s is None:
        y = curve.V if hasattr(curve, "V") else (curve.d if hasattr(curve, "d") else curve.W)
        s = CubicSpline(curve.R, y, bc_type="natural")
        object.__setattr__(curve, "_spline", s)
    return s


def interpolate(curve, r):
    """Natural-cubic-spline value(s) of a curve at R = r (bohr).

    Exact at the tabulation knots. Out-of-range R raises: there is no
    silent extrapolation.
    """
    arr = np.asarray(r, dtype=float)
    if np.any(arr < curve.R[0]) or np.any(arr > curve.R[-1]):
        bad = arr[(arr < curve.R[0]) | (arr > curve.R[-1])]
        raise CurveError(f"R={float(np.ravel(bad)[0])!r} outside tabulated range "
                         f"[{curve.R[0]!r}, {curve.R[-1]!r}]")
    out = curve.spline()(arr)
    return float(out) if np.isscalar(r) or arr.ndim == 0 else out


# ---------------------------------------------------------------------------
# Container format
# ---------------------------------------------------------------------------

def read_table(path):
    """Read a container file: (header dict, numeric array of shape (n, ncols))."""
    header = {}
    rows = []
    ncols = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if "=" in token:
                        key, _, val = token.partition("=")
                        header[key] = val
                continue
            parts = line.replace(",", " ").split()
            try:
                row = [float(p) for p in parts]
            except ValueError:
                raise CurveFormatError(f"non-numeric row: {line!r}", path, lineno)
            if ncols is None:
                ncols = len(row)
            elif len(row) != ncols:
                raise CurveFormatError(
                    f"expected {ncols} columns, got {len(row)}", path, lineno)
            rows.append((lineno, row))
    if not rows:
        raise CurveFormatError("no numeric rows", path)
    data = np.array([r for _, r in rows], dtype=float)
    linenos = [n for n, _ in rows]
    return header, data, linenos


def write_table(path, header: dict, data: np.ndarray):
    """Write a container file. Floats use repr so reload is bit-identical."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + " ".join(f"{k}={v}" for k, v in header.items()) + "\n")
        for row in np.atleast_2d(data):
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def load_curve(path, schema: str):
    """Load and validate a curve file.

    Parameters
    ----------
    path : str or Path
        Container file as produced by :func:`save_curve`.
    schema : {"potential", "dipole", "spin_orbit"}
        Expected curve type; mismatching `kind` headers are rejected.

    Returns
    -------
    PotentialCurve or TransitionDipoleCurve or SpinOrbitFunction
        Curve converted to atomic units.
    """
    header, data, linenos = read_table(path)
    kind = header.get("kind", schema)
    if kind != schema:
        raise CurveFormatError(f"file is kind={kind!r}, expected {schema!r}", path)
    if data.shape[1] < 2:
        raise CurveFormatError("need at least two columns (R, value)", path)

    r_unit = header.get("unit_R", "bohr")
    R = np.array([units.convert(units.Quantity(v, "length", r_unit), "bohr").value
                  for v in data[:, 0]])
    # Report ordering violations against the file, not the converted array;
    # duplicate R shows up here as dr == 0.
    dr = np.diff(R)
    if np.any(dr <= 0):
        i = int(np.argmax(dr <= 0))
        raise CurveFormatError("R not strictly increasing", path, linenos[i + 1])

    try:
        if schema == "potential":
            v_unit = header.get("unit_V", "hartree")
            V = np.array([units.energy_to_au(v, v_unit) for v in data[:, 1]])
            de_raw = header.get("dissociation_energy")
            de = units.energy_to_au(float(de_raw), v_unit) if de_raw is not None else float(V[-1])
            return PotentialCurve(
                label=header.get("label", "?"),
                lam=int(header.get("lambda", 0)),
                spin=header.get("spin", "singlet"),
                gerade=header.get("parity", "g"),
                R=R, V=V,
                dissociation_energy=de,
            )
        if schema == "dipole":
            return TransitionDipoleCurve(
                from_label=header.get("from", "?"),
                to_label=header.get("to", "?"),
                orientation=header.get("orientation", "parallel"),
                R=R, d=data[:, 1].astype(float),
            )
        if schema == "spin_orbit":
            w_unit = header.get("unit_W", "hartree")
            W = np.array([units.energy_to_au(v, w_unit) for v in data[:, 1]])
            return SpinOrbitFunction(R=R, W=W)
    except CurveError as err:
        raise CurveFormatError(str(err), path) from err
    raise ValueError(f"unknown schema {schema!r}")


def save_curve(curve, path):
    """Write a curve back to the container format (atomic units)."""
    if isinstance(curve, PotentialCurve):
        header = {
            "kind": "potential", "label": curve.label, "lambda": curve.lam,
            "spin": curve.spin, "parity": curve.gerade,
            "unit_R": "bohr", "unit_V": "hartree",
            "dissociation_energy": repr(curve.dissociation_energy),
        }
        data = np.column_stack([curve.R, curve.V])
    elif isinstance(curve, TransitionDipoleCurve):
        header = {
            "kind": "dipole", "from": curve.from_label, "to": curve.to_label,
            "orientation": curve.orientation, "unit_R": "bohr", "unit_d": "au",
        }
        data = np.column_stack([curve.R, curve.d])
    elif isinstance(curve, SpinOrbitFunction):
        header = {"kind": "spin_orbit", "unit_R": "bohr", "unit_W": "hartree"}
        data = np.column_stack([curve.R, curve.W])
    else:
        raise TypeError(f"cannot save {type(curve).__name__}")
    write_table(path, header, data)


# ---------------------------------------------------------------------------
# Curve surgery
# ---------------------------------------------------------------------------

def _smoothstep(t):
    # cubic Hermite step: s(0)=0, s(1)=1, s'(0)=s'(1)=0
    return t * t * (3.0 - 2.0 * t)


def splice(base: PotentialCurve, patch: PotentialCurve, window, blend_width: float = 0.5
           ) -> PotentialCurve:
    """Replace `base` by `patch` inside `window`, with smooth edges.

    Inside the window, base samples are dropped and patch samples take
    over; near each window edge (over `blend_width`) the value is a cubic
    Hermite blend of the two splines, which makes the result continuous in
    value and slope at both edges. Outside the window the base data passes
    through untouched, so a patch identical to the base reproduces the
    base exactly.
    """
    r1, r2 = float(window[0]), float(window[1])
    if not (r1 < r2):
        raise CurveError(f"window must satisfy R1 < R2, got [{r1}, {r2}]")
    if r1 < base.rmin or r2 > base.rmax:
        raise CurveError(f"window [{r1}, {r2}] outside base support "
                         f"[{base.rmin}, {base.rmax}]")
    if r1 < patch.rmin or r2 > patch.rmax:
        raise CurveError(f"window [{r1}, {r2}] outside patch support "
                         f"[{patch.rmin}, {patch.rmax}]")
    w = min(blend_width, 0.45 * (r2 - r1))

    base_s = base.spline()
    patch_s = patch.spline()

    inside = (patch.R >= r1) & (patch.R <= r2)
    outside = (base.R < r1) | (base.R > r2)
    R_new = np.unique(np.concatenate([base.R[outside], patch.R[inside]]))

    V_new = np.empty_like(R_new)
    for i, r in enumerate(R_new):
        if r < r1 or r > r2:
            V_new[i] = base_s(r)
        elif r < r1 + w:
            s = _smoothstep((r - r1) / w)
            V_new[i] = (1.0 - s) * base_s(r) + s * patch_s(r)
        elif r > r2 - w:
            s = _smoothstep((r2 - r) / w)
            V_new[i] = (1.0 - s) * base_s(r) + s * patch_s(r)
        else:
            V_new[i] = patch_s(r)

    return replace(base, R=R_new, V=V_new)


def extend_long_range(curve: PotentialCurve, coefficients: dict, r_match: float,
                      r_max: float = 200.0, blend_width: float = 0.5,
                      growth: float = 1.05) -> PotentialCurve:
    """Extend a potential beyond `r_match` with a dispersion tail.

    The analytic tail V(R) = D - sum_n Cn / R^n is shifted vertically so it
    meets the tabulated value at the matching point (the tabulated data is
    authoritative; the shift is applied to the tail and recorded in the
    curve notes). Over `blend_width` past the matching point the slope is
    blended from the local tabulated slope into the tail slope, so the
    extended curve is smooth in value and first derivative.

    Parameters
    ----------
    coefficients : dict
        {n: Cn} in atomic units with n in {3, 6, 8, 10}.
    r_match : float
        Matching point, must lie inside the tabulated range.
    r_max : float
        Outer end of the extension grid.
    """
    for n in coefficients:
        if n not in (3, 6, 8, 10):
            raise CurveError(f"unsupported long-range power n={n}")
    if not (curve.rmin < r_match < curve.rmax):
        raise CurveError(f"r_match={r_match} outside tabulated range "
                         f"[{curve.rmin}, {curve.rmax}]")
    if r_max <= r_match:
        raise CurveError("r_max must exceed r_match")

    d0 = curve.dissociation_energy
    s = curve.spline()

    def tail(r):
        return d0 - sum(c / np.power(r, n) for n, c in coefficients.items())

    v_match = float(s(r_match))
    dv_match = float(s(r_match, 1))
    shift = v_match - float(tail(r_match))
    notes = curve.notes + (f"long_range_shift={shift!r}",)

    # Extension grid: spacing grows geometrically from the local data spacing.
    i = min(max(int(np.searchsorted(curve.R, r_match)), 1), len(curve.R) - 1)
    h = float(curve.R[i] - curve.R[i - 1])
    pts = []
    r = r_match
    while r < r_max:
        r = r + h
        h *= growth
        pts.append(min(r, r_max))
    R_ext = np.array(pts)

    w = blend_width
    V_ext = np.empty_like(R_ext)
    for i, rr in enumerate(R_ext):
        t_val = float(tail(rr)) + shift
        if rr < r_match + w:
            t = _smoothstep((rr - r_match) / w)
            linear = v_match + dv_match * (rr - r_match)
            V_ext[i] = (1.0 - t) * linear + t * t_val
        else:
            V_ext[i] = t_val

    keep = curve.R <= r_match
    R_new = np.concatenate([curve.R[keep], R_ext])
    V_new = np.concatenate([curve.V[keep], V_ext])

    new_de = d0 + shift
    well_old = d0 - float(np.min(curve.V))
    well_new = new_de - float(np.min(V_new))
    if well_old * well_new < 0:
        notes = notes + ("long_range_shift_flips_well_depth",)

    return replace(curve, R=R_new, V=V_new, dissociation_energy=new_de,
                   long_range=dict(coefficients), notes=notes)
