from django.core.management.base import CommandError

from architectures.builders import BUILDERS, build_smc
from datagen.dataset import read_dataset
from networks.checkpoint import save
from networks.training import TrainConfig, train

from ...utils import atomic_write
from ..base import ArtifactCommand, Artifacts, preset


class Command(ArtifactCommand):
    help = 'Train one architecture with minibatch SGD and write the best-epoch checkpoint.'
    path_options = ('data', 'valid', 'out')

    def add_arguments(self, parser):
        parser.add_argument('--arch', required=True, choices=sorted(BUILDERS))
        parser.add_argument('--data', required=True, help='Training FSDS file.')
        parser.add_argument('--valid', required=True, help='Validation FSDS file.')
        parser.add_argument('--lr', type=float)
        parser.add_argument('--batch', type=int)
        parser.add_argument('--epochs', type=int)
        parser.add_argument('--patience', type=int)
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--preset', default='desk')
        parser.add_argument('--out', required=True, help='Checkpoint file to write.')

    def run(self, **options):
        arch = options['arch']
        defaults = preset(options['preset'], arch)
        # explicit flags win over the preset
        config = TrainConfig(
            learning_rate=options['lr'] if options['lr'] is not None else defaults['lr'],
            batch_size=options['batch'] if options['batch'] is not None else defaults['batch'],
            max_epochs=options['epochs'] if options['epochs'] is not None else defaults['epochs'],
            patience=options['patience'] if options['patience'] is not None else defaults['patience'],
            seed=options['seed'],
        )
        train_set = read_dataset(options['data'])
        valid_set = read_dataset(options['valid'])
        for path, dataset in ((options['data'], train_set), (options['valid'], valid_set)):
            if dataset.name != arch:
                raise CommandError(f'{path} holds {dataset.name} samples, --arch is {arch}')

        # one SMC head per labelled pillar in the dataset
        if arch == 'smc':
            net = build_smc(seed=options['seed'], heads=train_set.labels.shape[1])
        else:
            net = BUILDERS[arch](seed=options['seed'])
        self.stdout.write(f'{net.tag}: {net.parameter_count()} parameters')
        for name, shape in net.describe():
            self.stdout.write(f'  {name:<12} {shape}')

        checkpoint, history = train(
            net,
            (train_set.inputs(), train_set.targets()),
            (valid_set.inputs(), valid_set.targets()),
            config,
        )
        atomic_write(options['out'], save(checkpoint))
        last = history[-1]
        accuracy = 'n/a' if last.valid_accuracy is None else f'{last.valid_accuracy:.4f}'
        self.stdout.write(
            f'trained {checkpoint.epochs} epochs, best valid loss {checkpoint.best_metric:.6f} '
            f'(last epoch accuracy {accuracy}); wrote {options["out"]}'
        )
        return Artifacts(
            primary=options['out'],
            outputs=[options['out']],
            inputs=[options['data'], options['valid']],
            seeds=[options['seed']],
        )
