import json
import logging
import os
import tempfile

from django.db import DatabaseError

from .models import Run

logger = logging.getLogger(__name__)

# manifests sit next to the primary output they describe
MANIFEST_SUFFIX = '.manifest.json'
MANIFEST_FIELDS = ('command', 'arguments', 'seeds', 'inputs', 'outputs', 'version', 'duration')


def atomic_write(path, data):
    """
    Writes `data` to `path` through a temporary file in the same directory,
    so readers see either the old file or the complete new one.
    """
    if isinstance(data, str):
        data = data.encode('utf-8')
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    handle, temporary = tempfile.mkstemp(dir=directory, prefix='.tmp-')
    # same directory as the target so os.replace stays on one filesystem
    try:
        with os.fdopen(handle, 'wb') as stream:
            stream.write(data)
        os.replace(temporary, path)
    except BaseException:
        if os.path.exists(temporary):
            os.remove(temporary)
        raise


def manifest_path(output):
    """
    Manifest file of an output: "<output>.manifest.json".
    """
    return f'{output}{MANIFEST_SUFFIX}'


def write_manifest(output, manifest):
    """
    Writes the run manifest next to the primary output.
    Returns:
        str: Path of the manifest file.
    """
    path = manifest_path(output)
    atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True) + '\n')
    return path


def read_manifest(path):
    """
    Raises:
        ValueError: If the file is not a run manifest.
    """
    with open(path, encoding='utf-8') as handle:
        try:
            manifest = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ValueError(f'{path} is not valid JSON: {exc}') from exc
    # extra fields are tolerated so older toolkits can read newer manifests
    missing = [name for name in MANIFEST_FIELDS if name not in manifest]
    if missing:
        raise ValueError(f'{path} is missing manifest fields: {", ".join(missing)}')
    return manifest


def record_run(manifest):
    """
    Stores a manifest in the run registry.
    Args:
        manifest (dict): Fields named in MANIFEST_FIELDS.
    Returns:
        The new Run, or None if the registry is unavailable (the manifest
        file remains the record of the run).
    """
    try:
        return Run.objects.create(**{name: manifest[name] for name in MANIFEST_FIELDS})
    except DatabaseError as exc:
        logger.warning('run registry unavailable, %s not recorded: %s', manifest['command'], exc)
        return None
