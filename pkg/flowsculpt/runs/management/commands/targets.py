import csv
import io
import os

from flow.imaging import shape_to_pgm
from metrics.report import make_targets

from ...utils import atomic_write
from ..base import ArtifactCommand, Artifacts, load_library


class Command(ArtifactCommand):
    help = 'Render seeded random pillar sequences into an evaluation target set.'
    path_options = ('maps', 'out')

    def add_arguments(self, parser):
        parser.add_argument('--n', type=int, default=20)
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--pillars', type=int, default=10, help='Pillars per generating sequence.')
        parser.add_argument('--min-complexity', type=float,
                            help='Keep drawing until every target exceeds this complexity (3.5 for the test gate).')
        parser.add_argument('--maps', help='Map library (default: built from settings).')
        parser.add_argument('--out', required=True, help='Directory to write targets into.')

    def run(self, **options):
        library = load_library(options['maps'])
        targets = make_targets(
            options['n'], options['seed'], library,
            pillars=options['pillars'], min_complexity=options['min_complexity'],
        )
        outputs = []
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(('target_id', 'sequence'))
        for number, (sequence, shape) in enumerate(targets):
            target_id = f'target_{number:02d}'
            path = os.path.join(options['out'], f'{target_id}.pgm')
            atomic_write(path, shape_to_pgm(shape))
            outputs.append(path)
            writer.writerow((target_id, ','.join(map(str, sequence))))
        listing = os.path.join(options['out'], 'sequences.csv')
        atomic_write(listing, buffer.getvalue())
        outputs.append(listing)
        self.stdout.write(f'wrote {len(targets)} targets to {options["out"]}')
        return Artifacts(
            primary=listing,
            outputs=outputs,
            inputs=[options['maps']] if options['maps'] else [],
            seeds=[options['seed']],
        )
