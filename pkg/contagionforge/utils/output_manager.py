import hashlib
import json
import logging
import os
from importlib import metadata
from typing import Any, Dict, Iterable, List, Optional, Set

logger = logging.getLogger(__name__)

MANIFEST_NAME = "run_manifest.json"
TRACKED_PACKAGES = [
    "numpy", "scipy", "pandas", "statsmodels", "scikit-learn",
    "PyWavelets", "networkx", "python-igraph", "pydantic",
]
# Settings that change how a run executes but not what it produces.
EXECUTION_ONLY = ("threads", "output_dir")


class OutputManager:
    """Owns one run's output directory and its manifest.

    Only files recorded through ``record`` during this run are hashed into
    the manifest; anything else already in the directory is left out.
    """

    def __init__(self, output_dir: str):
        self.output_dir = output_dir
        self.written: Set[str] = set()
        os.makedirs(output_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def record(self, name: str) -> str:
        rel = os.path.normpath(name).replace(os.sep, "/")
        self.written.add(rel)
        return self.path(name)

    def _compute_file_hash(self, file_path: str) -> str:
        """SHA-256 of file contents."""
        sha256_hash = hashlib.sha256()
        with open(file_path, "rb") as f:
            for byte_block in iter(lambda: f.read(4096), b""):
                sha256_hash.update(byte_block)
        return sha256_hash.hexdigest()

    def list_outputs(self) -> List[str]:
        """Every file under the output directory except the manifest."""
        files = []
        for root, _, names in os.walk(self.output_dir):
            for name in names:
                rel = os.path.relpath(os.path.join(root, name), self.output_dir)
                if rel != MANIFEST_NAME:
                    files.append(rel.replace(os.sep, "/"))
        return sorted(files)

    def file_hashes(self, names: Optional[Iterable[str]] = None) -> Dict[str, str]:
        selected = self.written if names is None else names
        return {rel: self._compute_file_hash(self.path(rel)) for rel in sorted(selected)}

    @staticmethod
    def package_versions() -> Dict[str, Optional[str]]:
        versions: Dict[str, Optional[str]] = {}
        for package in TRACKED_PACKAGES:
            try:
                versions[package] = metadata.version(package)
            except metadata.PackageNotFoundError:
                versions[package] = None
        return versions

    def write_manifest(self, config: Dict[str, Any], extra: Optional[Dict[str, Any]] = None) -> str:
        """Write run_manifest.json: config, seed, package versions and output hashes.

        The manifest carries no timestamps, so reruns produce identical bytes.
        """
        from .. import __version__

        recorded = {k: v for k, v in config.items() if k not in EXECUTION_ONLY}
        manifest = {
            "contagionforge": __version__,
            "seed": recorded.get("seed"),
            "config": recorded,
            "packages": self.package_versions(),
            "outputs": self.file_hashes(),
        }
        if extra:
            manifest.update(extra)
        target = self.path(MANIFEST_NAME)
        with open(target, "w", encoding="utf-8", newline="\n") as f:
            json.dump(manifest, f, indent=2, sort_keys=True, default=str)
            f.write("\n")
        logger.info(f"Wrote {MANIFEST_NAME} covering {len(manifest['outputs'])} files")
        return target

    def load_manifest(self) -> Dict[str, Any]:
        try:
            with open(self.path(MANIFEST_NAME), "r", encoding="utf-8") as f:
                return json.load(f)
        except FileNotFoundError:
            return {}
