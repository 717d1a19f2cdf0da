import glob
import logging
import os

from django.core.management.base import CommandError

from architectures.predictors import predict_sequence_smc
from flow.imaging import read_shape
from inference.exceptions import MissingModelError
from inference.pipeline import Mode, run_pipeline
from metrics.report import eval_report, report_to_csv

from ...utils import atomic_write
from ..base import ArtifactCommand, Artifacts, load_library, load_models
from .infer import add_inference_arguments, inference_config

logger = logging.getLogger(__name__)

METHODS = ('smc', *(mode.value for mode in Mode))


def _required_models(method):
    if method == 'smc':
        return ['smc']
    mode = Mode(method)
    return [key for key in (mode.classifier, 'itn' if mode.uses_bridge else None) if key]


class Command(ArtifactCommand):
    help = 'Compare inference methods on a directory of target images and write a CSV report.'
    path_options = ('targets', 'apn', 'apnc', 'itn', 'smc', 'maps', 'report')

    def add_arguments(self, parser):
        parser.add_argument('--targets', required=True, help='Directory of target_XX.pgm images.')
        parser.add_argument('--methods', default='smc,apn,apn+itn',
                            help=f'Comma-separated methods from {", ".join(METHODS)}.')
        parser.add_argument('--smc', help='CNN-SMC checkpoint.')
        add_inference_arguments(parser)
        parser.add_argument('--report', required=True, help='CSV report to write.')

    def run(self, **options):
        methods = [name.strip() for name in options['methods'].split(',') if name.strip()]
        unknown = [name for name in methods if name not in METHODS]
        if not methods or unknown:
            raise CommandError(f'unknown methods {unknown}; choose from {", ".join(METHODS)}')
        paths = sorted(glob.glob(os.path.join(options['targets'], 'target_*.pgm')))
        if not paths:
            raise CommandError(f'no target_*.pgm images in {options["targets"]}')

        models = load_models({key: options[key] for key in ('apn', 'apnc', 'itn', 'smc')})
        for name in methods:
            missing = [key for key in _required_models(name) if key not in models]
            if missing:
                raise MissingModelError(f'method {name} needs --{" --".join(missing)}')
        configs = {name: inference_config(options, Mode(name)) for name in methods if name != 'smc'}
        library = load_library(options['maps'])

        def predictor(name):
            if name == 'smc':
                return lambda target: predict_sequence_smc(models['smc'], target)
            return lambda target: run_pipeline(target, library, configs[name], models)[0]

        targets = [read_shape(path) for path in paths]
        target_ids = [os.path.splitext(os.path.basename(path))[0] for path in paths]
        report = eval_report(targets, {name: predictor(name) for name in methods}, library, target_ids)
        atomic_write(options['report'], report_to_csv(report))

        for name, (mean_pmr, mean_ssim) in report.averages.items():
            self.stdout.write(f'{name:<12} pmr {mean_pmr:.4f} ssim {mean_ssim:.4f}')
        logger.info('methods by mean pmr: %s', ' > '.join(report.ranking()))

        inputs = paths + [options[key] for key in ('apn', 'apnc', 'itn', 'smc', 'maps') if options[key]]
        return Artifacts(primary=options['report'], outputs=[options['report']], inputs=inputs)
