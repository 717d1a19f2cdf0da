import os

from flow.forward import render, render_frames
from flow.imaging import read_shape, shape_to_pgm
from inference.pipeline import InferenceConfig, Mode, run_pipeline
from inference.tracefile import sequence_to_text, trace_to_csv
from metrics.similarity import pmr

from ...utils import atomic_write
from ..base import ArtifactCommand, Artifacts, load_library, load_models


def add_inference_arguments(parser):
    """
    Checkpoint and stopping-rule flags shared by `infer` and `eval`.
    """
    parser.add_argument('--apn', help='APN checkpoint.')
    parser.add_argument('--apnc', help='APN-C checkpoint.')
    parser.add_argument('--itn', help='ITN checkpoint.')
    parser.add_argument('--maps', help='Map library (default: built from settings).')
    parser.add_argument('--max-steps', type=int, help='Pillar budget over both stages.')
    parser.add_argument('--stage-a-steps', type=int, help='Pillar budget of the bridging stage.')
    parser.add_argument('--patience', type=int, help='Steps without improvement before a stage stops.')
    parser.add_argument('--tau-a', type=float, help='PMR to the bridging shape that ends the first stage.')
    parser.add_argument('--tau-b', type=float, help='PMR to the target that ends the second stage.')
    parser.add_argument('--prune', action='store_true', help='Drop redundant pillars from the result.')


def inference_config(options, mode):
    return InferenceConfig.from_settings(
        tau_a=options['tau_a'],
        tau_b=options['tau_b'],
        max_steps_total=options['max_steps'],
        max_steps_stage_a=options['stage_a_steps'],
        no_improve_patience=options['patience'],
        mode=mode,
        prune=options['prune'],
    )


class Command(ArtifactCommand):
    help = 'Infer a pillar sequence whose flow shape matches a target image.'
    path_options = ('target', 'apn', 'apnc', 'itn', 'maps', 'out', 'trace', 'frames')

    def add_arguments(self, parser):
        parser.add_argument('--target', required=True, help='Target PGM image.')
        parser.add_argument('--mode', choices=[mode.value for mode in Mode], default=Mode.APN_ITN.value)
        add_inference_arguments(parser)
        parser.add_argument('--out', required=True, help='Sequence file to write.')
        parser.add_argument('--trace', help='Step trace CSV to write.')
        parser.add_argument('--frames', help='Directory for one PGM per prefix of the result.')

    def run(self, **options):
        mode = Mode(options['mode'])
        config = inference_config(options, mode)
        target = read_shape(options['target'])
        library = load_library(options['maps'])
        models = load_models({key: options[key] for key in ('apn', 'apnc', 'itn')})

        sequence, trace = run_pipeline(target, library, config, models)
        score = pmr(render(sequence, library), target)

        outputs = [options['out']]
        atomic_write(options['out'], sequence_to_text(sequence))
        if options['trace']:
            atomic_write(options['trace'], trace_to_csv(trace))
            outputs.append(options['trace'])
        if options['frames']:
            for step, frame in enumerate(render_frames(sequence, library)):
                path = os.path.join(options['frames'], f'frame_{step:02d}.pgm')
                atomic_write(path, shape_to_pgm(frame))
                outputs.append(path)
        self.stdout.write(f'sequence {",".join(map(str, sequence)) or "(empty)"} pmr {score:.4f}')

        inputs = [options['target']] + [options[key] for key in ('apn', 'apnc', 'itn', 'maps') if options[key]]
        return Artifacts(primary=options['out'], outputs=outputs, inputs=inputs)
