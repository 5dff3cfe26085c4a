"""Crystal dispersion: Sellmeier-form principal refractive indices.

Wavelengths cross every public interface in nanometers; the conversion to
micrometers happens once, inside :meth:`DispersionModel.index`.
"""

from __future__ import annotations

import math
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass
from importlib import resources

from .errors import CrystalDataError, WavelengthRangeError

# form_id -> expected coefficient count (None = variable, validated separately)
_FORMS = {
    "sellmeier_offset": 4,
    "sellmeier_rational": None,
}

ENV_DB_VAR = "RINGTRACE_CRYSTAL_DB"


@dataclass(frozen=True)
class DispersionModel:
    """One principal axis: algebraic Sellmeier variant plus its coefficients."""

    form_id: str
    coefficients: tuple[float, ...]

    def __post_init__(self):
        if self.form_id not in _FORMS:
            raise CrystalDataError(
                f"unknown form_id {self.form_id!r}; known: {sorted(_FORMS)}"
            )
        expected = _FORMS[self.form_id]
        n = len(self.coefficients)
        if expected is not None and n != expected:
            raise CrystalDataError(
                f"form {self.form_id!r} needs {expected} coefficients, got {n}"
            )
        if self.form_id == "sellmeier_rational" and (n < 3 or n % 2 == 0):
            raise CrystalDataError(
                f"form 'sellmeier_rational' needs an odd count >= 3, got {n}"
            )

    def index(self, wavelength_nm: float) -> float:
        """Refractive index at a vacuum wavelength given in nanometers."""
        lam = wavelength_nm * 1e-3  # nm -> um
        l2 = lam * lam
        c = self.coefficients
        if self.form_id == "sellmeier_offset":
            n2 = c[0] + c[1] / (l2 - c[2]) - c[3] * l2
        else:  # sellmeier_rational
            n2 = c[0]
            for i in range(1, len(c), 2):
                n2 += c[i] * l2 / (l2 - c[i + 1])
        if not (n2 > 1.0 and math.isfinite(n2)):
            raise WavelengthRangeError(
                f"dispersion model gives non-physical n^2 = {n2} at {wavelength_nm} nm"
            )
        return math.sqrt(n2)


@dataclass(frozen=True)
class CrystalSpecies:
    """A crystal: symmetry class plus the three principal-axis models."""

    id: str
    symmetry: str  # "uniaxial-negative" | "biaxial-negative"
    axes: tuple[DispersionModel, DispersionModel, DispersionModel]  # x, y, z
    valid_range_nm: tuple[float, float]
    source: str

    @property
    def is_uniaxial(self) -> bool:
        return self.symmetry.startswith("uniaxial")

    def check_range(self, wavelength_nm: float) -> None:
        lo, hi = self.valid_range_nm
        if not (lo <= wavelength_nm <= hi):
            raise WavelengthRangeError(
                f"{wavelength_nm} nm outside validity range [{lo}, {hi}] nm "
                f"of crystal {self.id}"
            )

    def principal_indices(self, wavelength_nm: float) -> tuple[float, float, float]:
        """(n_x, n_y, n_z) at a wavelength in nanometers."""
        self.check_range(wavelength_nm)
        return tuple(ax.index(wavelength_nm) for ax in self.axes)


def principal_indices(species: CrystalSpecies, wavelength_nm: float):
    return species.principal_indices(wavelength_nm)


def _validate_species(sp: CrystalSpecies) -> None:
    lo, hi = sp.valid_range_nm
    if not (0 < lo < hi):
        raise CrystalDataError(f"{sp.id}: bad valid_range_nm [{lo}, {hi}]")
    if sp.symmetry not in ("uniaxial-negative", "biaxial-negative"):
        raise CrystalDataError(f"{sp.id}: unknown symmetry {sp.symmetry!r}")
    if sp.is_uniaxial and sp.axes[0] != sp.axes[1]:
        raise CrystalDataError(
            f"{sp.id}: uniaxial species must have identical x and y axis models"
        )
    # spot-check the biaxial ordering invariant across the validity range
    if not sp.is_uniaxial:
        for lam in (lo, 0.5 * (lo + hi), hi):
            nx, ny, nz = sp.principal_indices(lam)
            if not (nx < ny < nz):
                raise CrystalDataError(
                    f"{sp.id}: principal indices not ordered n_x < n_y < n_z "
                    f"at {lam:.1f} nm (got {nx:.6f}, {ny:.6f}, {nz:.6f})"
                )


def default_database_path() -> str:
    """Path of the crystal data file: env override, else the shipped default."""
    env = os.environ.get(ENV_DB_VAR)
    if env:
        return env
    return str(resources.files("ringtrace").joinpath("data/crystals.toml"))


def load_crystal_database(path: str | None = None) -> dict[str, CrystalSpecies]:
    """Parse a crystal data file into a registry keyed by crystal id."""
    if path is None:
        path = default_database_path()
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise CrystalDataError(f"crystal database not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise CrystalDataError(f"cannot parse {path}: {exc}") from exc

    registry: dict[str, CrystalSpecies] = {}
    for cid, section in doc.items():
        if cid in registry:
            raise CrystalDataError(f"duplicate crystal id {cid!r}")
        if not isinstance(section, dict):
            raise CrystalDataError(f"{cid}: expected a section, got {section!r}")
        try:
            form = section["form_id"]
            axes = tuple(
                DispersionModel(form, tuple(float(v) for v in section[key]))
                for key in ("coefficients_x", "coefficients_y", "coefficients_z")
            )
            sp = CrystalSpecies(
                id=cid,
                symmetry=section["symmetry"],
                axes=axes,
                valid_range_nm=tuple(float(v) for v in section["valid_range_nm"]),
                source=section.get("source", ""),
            )
        except KeyError as exc:
            raise CrystalDataError(f"{cid}: missing key {exc}") from exc
        _validate_species(sp)
        registry[cid] = sp
    if not registry:
        raise CrystalDataError(f"no crystals defined in {path}")
    return registry


_default_registry: dict[str, CrystalSpecies] | None = None


def get_crystal(cid: str, path: str | None = None) -> CrystalSpecies:
    """Look up a crystal in the default registry (loaded once, immutable)."""
    global _default_registry
    if path is not None:
        reg = load_crystal_database(path)
    else:
        if _default_registry is None:
            _default_registry = load_crystal_database()
        reg = _default_registry
    try:
        return reg[cid]
    except KeyError:
        raise CrystalDataError(
            f"unknown crystal {cid!r}; available: {sorted(reg)}"
        ) from None
