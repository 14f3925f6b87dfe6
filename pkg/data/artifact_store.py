import logging
from pathlib import Path

from config import env

logger = logging.getLogger(__name__)

REPO_ROOT = Path(__file__).resolve().parent.parent

artifact_mappings = {
    'production': 'production',
    'staging':    'staging',
    'sandbox':    'sandbox',
}

KINDS = ('codebooks', 'runs', 'traces')


def artifact_root(environment: str | None = None) -> Path:
    """Artifact directory of an environment: artifacts/<env>/ under the repository root."""
    environment = environment or env
    if environment not in artifact_mappings:
        logger.warning("unknown data_env '%s'; using sandbox artifacts", environment)
    return REPO_ROOT / 'artifacts' / artifact_mappings.get(environment, 'sandbox')


def artifact_dir(kind: str, environment: str | None = None, create: bool = True) -> Path:
    if kind not in KINDS:
        raise ValueError(f"artifact kind must be one of {KINDS}, got '{kind}'")
    path = artifact_root(environment) / kind
    if create:
        path.mkdir(parents=True, exist_ok=True)
    return path


def list_artifacts(kind: str, pattern: str = '*', environment: str | None = None) -> list[Path]:
    path = artifact_dir(kind, environment, create=False)
    if not path.exists():
        return []
    return sorted(path.glob(pattern))
