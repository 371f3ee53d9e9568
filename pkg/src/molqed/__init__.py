"""Design simulator for polar molecules trapped above superconducting stripline resonators."""

__version__ = "0.1.0"

from .units import CONSTANTS, MoleculeSpec, convert, lookup_molecule, register_molecule  # noqa: E402

__all__ = ["CONSTANTS", "MoleculeSpec", "convert", "lookup_molecule", "register_molecule", "__version__"]
