import hashlib
import logging
import platform
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numba
import numpy as np
import pandas as pd
import scipy
from git import InvalidGitRepositoryError, NoSuchPathError, Repo
from git.exc import GitError

from ._version import __version__

logger = logging.getLogger(__name__)


class SourceRevision:
    """Git state of the directory a run was started from, using GitPython."""

    def __init__(self, repo_path: Union[str, Path] = "."):
        self.repo_path = str(repo_path)
        self._repo: Optional[Repo] = None

    @property
    def repo(self) -> Optional[Repo]:
        """The enclosing repository, or None outside a working tree."""
        if self._repo is None:
            try:
                self._repo = Repo(self.repo_path, search_parent_directories=True)
            except (InvalidGitRepositoryError, NoSuchPathError):
                return None
        return self._repo

    def get_revision(self) -> Optional[str]:
        """Hex SHA of HEAD; None without a repository or without commits."""
        if self.repo is None:
            return None
        try:
            return self.repo.head.commit.hexsha
        except (ValueError, GitError) as e:
            logger.debug("No HEAD commit in %s: %s", self.repo_path, e)
            return None

    def is_dirty(self) -> Optional[bool]:
        if self.repo is None:
            return None
        try:
            return self.repo.is_dirty(untracked_files=False)
        except GitError:
            return None

    def get_branch_name(self) -> Optional[str]:
        if self.repo is None:
            return None
        try:
            return self.repo.active_branch.name
        except (TypeError, GitError):
            # detached HEAD
            return None

    def describe(self) -> Dict[str, Any]:
        return {"revision": self.get_revision(), "branch": self.get_branch_name(), "dirty": self.is_dirty()}


def library_versions() -> Dict[str, str]:
    return {
        "drive_styles": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "numba": numba.__version__,
        "python": platform.python_version(),
    }


def sha256_file(path: Union[str, Path], chunk_size: int = 1 << 16) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()
