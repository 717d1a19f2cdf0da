"""
Shared plumbing of the artifact-writing management commands.
"""
import logging
import os
import time
from dataclasses import dataclass, field

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from architectures.predictors import MODEL_TYPES, load_model
from flow.forward import ChannelSpec, MapGenParams
from flow.library import PillarLibrary, library_from_bytes

from ..utils import record_run, write_manifest

logger = logging.getLogger(__name__)


@dataclass
class Artifacts:
    """
    What a command produced.

    Attributes:
        primary (str): Output the manifest is written next to.
        outputs (list[str]): Every file written, primary included.
        inputs (list[str]): Files read.
        seeds (list[int]): Seeds consumed.
    """
    primary: str
    outputs: list = field(default_factory=list)
    inputs: list = field(default_factory=list)
    seeds: list = field(default_factory=list)


def _base_dests():
    # argparse has no public accessor for registered actions; _actions is stable across 3.x
    parser = BaseCommand().create_parser('manage.py', 'base')
    return {action.dest for action in parser._actions}


def load_library(path=None):
    """
    Reads a map library, or builds the default one from settings when no
    path is given.
    """
    channel = ChannelSpec(**settings.FLOWSCULPT['CHANNEL'])
    if path is None:
        return PillarLibrary.build(channel, MapGenParams(**settings.FLOWSCULPT['MAPS']))
    with open(path, 'rb') as handle:
        return library_from_bytes(handle.read(), inlet_fraction=channel.inlet_fraction)


def preset(name, kind):
    """
    Sample counts and optimiser settings of a named preset for one architecture.
    """
    presets = settings.FLOWSCULPT_PRESETS
    if name not in presets:
        raise CommandError(f'unknown preset {name!r} (choose from {", ".join(presets)})')
    values = dict(presets[name][kind])
    values.update(lr=presets[name]['lr'], patience=presets[name]['patience'])
    return values


class ArtifactCommand(BaseCommand):
    """
    Base for commands that write files.

    Subclasses implement `run(**options)` returning Artifacts. The base
    turns toolkit and I/O errors into CommandError, then writes the
    manifest next to the primary output and records the run.
    """
    # option dests holding paths; recorded as absolute paths
    path_options = ()

    def run(self, **options):
        raise NotImplementedError('subclasses of ArtifactCommand must provide a run() method')

    @property
    def command_name(self):
        return self.__module__.rsplit('.', 1)[-1]

    def recorded_arguments(self, options):
        """
        Rebuilds an argument list that reproduces this invocation.
        """
        base = _base_dests()
        parser = self.create_parser('manage.py', self.command_name)
        arguments = []
        # same private action list as _base_dests
        for action in parser._actions:
            if action.dest in base or not action.option_strings:
                continue
            value = options.get(action.dest)
            flag = action.option_strings[-1]
            if action.nargs == 0:
                if value and value != action.default:
                    arguments.append(flag)
            elif value is not None:
                if action.dest in self.path_options:
                    value = os.path.abspath(value)
                arguments.extend([flag, str(value)])
        return arguments

    def handle(self, *args, **options):
        started = time.perf_counter()
        try:
            artifacts = self.run(**options)
        except (ValueError, OSError) as exc:
            raise CommandError(str(exc)) from exc
        manifest = {
            'command': self.command_name,
            'arguments': self.recorded_arguments(options),
            'seeds': list(artifacts.seeds),
            'inputs': [os.path.abspath(path) for path in artifacts.inputs],
            'outputs': [os.path.abspath(path) for path in artifacts.outputs],
            'version': settings.FLOWSCULPT['VERSION'],
            'duration': round(time.perf_counter() - started, 3),
        }
        path = write_manifest(artifacts.primary, manifest)
        record_run(manifest)
        logger.info('%s finished in %.2fs, manifest %s', self.command_name, manifest['duration'], path)


def load_models(paths):
    """
    Loads the checkpoints named in `paths` ({'apn': path, 'itn': path, ...}),
    checking each holds the architecture its key names.
    """
    return {key: load_model(path, MODEL_TYPES[key]) for key, path in paths.items() if path}
