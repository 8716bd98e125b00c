"""archreg: rigid registration of scanned dental arch meshes to CT volumes."""

__version__ = "0.1.0"
