from django.core.management.base import BaseCommand, CommandError

from flow.imaging import read_shape
from metrics.complexity import TEST_GATE, perimetric_complexity


class Command(BaseCommand):
    help = 'Print the perimetric complexity of a PGM flow shape.'

    def add_arguments(self, parser):
        parser.add_argument('--image', required=True)

    def handle(self, *args, **options):
        try:
            report = perimetric_complexity(read_shape(options['image']))
        except (ValueError, OSError) as exc:
            raise CommandError(str(exc)) from exc
        gate = 'passes' if report.passes_gate else 'fails'
        self.stdout.write(
            f'perimeter {report.perimeter} area {report.area} complexity {report.complexity:.6f} '
            f'({gate} C > {TEST_GATE})'
        )
