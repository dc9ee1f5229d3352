import fnmatch
import os

import pathspec

from rewardmap.errors import UsageError

DEFAULT_INCLUDE_PATTERNS = {"*.json"}
DEFAULT_EXCLUDE_PATTERNS = {"manifest.*", "*balance_report.json", "*score_summary.json", "*metrics.json", "*policy.json", "*plan.json"}


def crawl_network_files(
    directory,
    include_patterns=None,
    exclude_patterns=None,
    use_relative_paths=True,
):
    """
    Collect Metro Data documents from a directory tree.

    Args:
        directory (str): Directory holding network files
        include_patterns (set): File patterns to include (defaults to {"*.json"})
        exclude_patterns (set): File patterns to exclude (defaults skip run artifacts)
        use_relative_paths (bool): Key files by their path relative to directory

    Returns:
        dict: {"files": {filepath: content}} in sorted path order
    """
    if not os.path.isdir(directory):
        raise UsageError(f"Network directory does not exist: {directory}")
    include_patterns = include_patterns or DEFAULT_INCLUDE_PATTERNS
    exclude_patterns = DEFAULT_EXCLUDE_PATTERNS if exclude_patterns is None else exclude_patterns

    # --- Load .gitignore ---
    gitignore_path = os.path.join(directory, ".gitignore")
    gitignore_spec = None
    if os.path.exists(gitignore_path):
        with open(gitignore_path, "r", encoding="utf-8-sig") as f:
            gitignore_spec = pathspec.PathSpec.from_lines("gitwildmatch", f.readlines())

    def excluded(relpath, name):
        if gitignore_spec and gitignore_spec.match_file(relpath):
            return True
        return any(
            fnmatch.fnmatch(relpath, pattern) or fnmatch.fnmatch(name, pattern)
            for pattern in exclude_patterns
        )

    found = []
    for root, dirs, files in os.walk(directory):
        dirs[:] = sorted(
            d
            for d in dirs
            if not excluded(os.path.relpath(os.path.join(root, d), directory), d)
        )
        for filename in files:
            filepath = os.path.join(root, filename)
            relpath = os.path.relpath(filepath, directory)
            if excluded(relpath, filename):
                continue
            if not any(fnmatch.fnmatch(filename, p) or fnmatch.fnmatch(relpath, p) for p in include_patterns):
                continue
            found.append((relpath, filepath))

    files_dict = {}
    for relpath, filepath in sorted(found):
        with open(filepath, "r", encoding="utf-8-sig") as f:
            files_dict[relpath if use_relative_paths else filepath] = f.read()

    print(f"Found {len(files_dict)} network file(s) in {directory}")
    return {"files": files_dict}
