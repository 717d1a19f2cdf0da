import logging

from django.conf import settings
from django.core.management import call_command
from django.core.management.base import BaseCommand, CommandError

from ...utils import read_manifest

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Re-run a recorded command from its manifest.'

    def add_arguments(self, parser):
        parser.add_argument('manifest', help='A <output>.manifest.json file.')

    def handle(self, *args, **options):
        """
        Calls the recorded command with its recorded arguments. The replayed
        command writes its own manifest and registry row.
        """
        try:
            manifest = read_manifest(options['manifest'])
        except (ValueError, OSError) as exc:
            raise CommandError(str(exc)) from exc
        if manifest['version'] != settings.FLOWSCULPT['VERSION']:
            logger.warning(
                'manifest was written by version %s, running %s; outputs may differ',
                manifest['version'], settings.FLOWSCULPT['VERSION'],
            )
        # arguments already hold absolute paths, so replay works from any directory
        logger.info('replaying %s %s', manifest['command'], ' '.join(manifest['arguments']))
        call_command(manifest['command'], *manifest['arguments'], stdout=self.stdout, stderr=self.stderr)
