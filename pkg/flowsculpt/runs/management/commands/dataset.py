from django.core.management.base import CommandError

from datagen.dataset import KINDS, dataset_to_bytes
from datagen.generation import GENERATORS, SPLITS

from ...utils import atomic_write
from ..base import ArtifactCommand, Artifacts, load_library, preset


class Command(ArtifactCommand):
    help = 'Generate a seeded training set (FSDS) for one architecture.'
    path_options = ('maps', 'out', 'valid_out')

    def add_arguments(self, parser):
        parser.add_argument('--kind', required=True, choices=sorted(KINDS))
        parser.add_argument('--n', type=int, help='Sample count (default: the preset train size).')
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--maps', help='Map library (default: built from settings).')
        parser.add_argument('--out', required=True)
        parser.add_argument('--split', choices=sorted(SPLITS), default='train')
        parser.add_argument('--valid-out', help='Also write the validation split here (preset valid size).')
        parser.add_argument('--valid-n', type=int, help='Validation sample count (default: the preset valid size).')
        parser.add_argument('--preset', default='desk')
        parser.add_argument('--threads', type=int, help='Worker cap (default: FLOWSCULPT_THREADS).')

    def run(self, **options):
        kind = options['kind']
        sizes = preset(options['preset'], kind)
        n = options['n'] if options['n'] is not None else sizes['train']
        valid_n = options['valid_n'] if options['valid_n'] is not None else sizes['valid']
        if n < 1 or valid_n < 1:
            raise CommandError('sample counts must be at least 1')
        if options['seed'] < 0:
            raise CommandError('--seed must be non-negative')
        # --valid-out always holds the valid split, which --split valid would write twice
        if options['split'] == 'valid' and options['valid_out']:
            raise CommandError('--valid-out cannot be combined with --split valid')
        library = load_library(options['maps'])
        generate = GENERATORS[kind]

        # the valid split draws from its own seed stream, so the two files never share samples
        dataset = generate(n, options['seed'], library, split=options['split'], threads=options['threads'])
        atomic_write(options['out'], dataset_to_bytes(dataset))
        outputs = [options['out']]
        self.stdout.write(f'wrote {len(dataset)} {kind} samples to {options["out"]}')
        if options['valid_out']:
            valid = generate(valid_n, options['seed'], library, split='valid', threads=options['threads'])
            atomic_write(options['valid_out'], dataset_to_bytes(valid))
            outputs.append(options['valid_out'])
            self.stdout.write(f'wrote {len(valid)} {kind} samples to {options["valid_out"]}')
        return Artifacts(
            primary=options['out'],
            outputs=outputs,
            inputs=[options['maps']] if options['maps'] else [],
            seeds=[options['seed']],
        )
