from flow.forward import render
from flow.imaging import shape_to_pgm
from inference.tracefile import sequence_from_text

from ...utils import atomic_write
from ..base import ArtifactCommand, Artifacts, load_library


class Command(ArtifactCommand):
    help = 'Render the flow shape of a pillar sequence to a PGM image.'
    path_options = ('maps', 'out')

    def add_arguments(self, parser):
        parser.add_argument('--seq', required=True, help='Comma-separated pillar indices ("" for none).')
        parser.add_argument('--maps', help='Map library (default: built from settings).')
        parser.add_argument('--out', required=True, help='PGM file to write.')

    def run(self, **options):
        # raises InvalidPillarError (a ValueError) before anything is written
        sequence = sequence_from_text(options['seq'])
        library = load_library(options['maps'])
        atomic_write(options['out'], shape_to_pgm(render(sequence, library)))
        return Artifacts(
            primary=options['out'],
            outputs=[options['out']],
            inputs=[options['maps']] if options['maps'] else [],
        )
