from django.core.management.base import BaseCommand

from flow.forward import CLASS_TABLE


class Command(BaseCommand):
    help = 'Print the 32 pillar classes: index, lateral position, diameter.'

    def handle(self, *args, **options):
        for config in CLASS_TABLE:
            self.stdout.write(f'{config.index} {config.position:.3f} {config.diameter:.3f}')
