from django.core.management.base import BaseCommand

from ...models import Run


class Command(BaseCommand):
    help = 'List recorded runs, newest first.'

    def add_arguments(self, parser):
        parser.add_argument('--limit', type=int, default=20)

    def handle(self, *args, **options):
        # Run.Meta orders newest first
        runs = Run.objects.all()[:options['limit']]
        for run in runs:
            # long output lists (frames directories) are cut after three paths
            outputs = ', '.join(run.outputs[:3]) + (' ...' if len(run.outputs) > 3 else '')
            self.stdout.write(
                f'{run.id} {run.created:%Y-%m-%d %H:%M:%S} {run.command} '
                f'({run.duration:.2f}s, v{run.version}) {outputs}'
            )
        if not runs:
            self.stdout.write('no runs recorded')
