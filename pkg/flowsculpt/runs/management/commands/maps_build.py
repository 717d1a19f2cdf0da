from django.conf import settings

from flow.forward import ChannelSpec, MapGenParams
from flow.library import PillarLibrary, library_to_bytes

from ...utils import atomic_write
from ..base import ArtifactCommand, Artifacts


class Command(ArtifactCommand):
    help = 'Build the 32 deformation maps and write them as an FSMP library.'
    path_options = ('out',)

    def add_arguments(self, parser):
        defaults = settings.FLOWSCULPT['MAPS']
        parser.add_argument('--out', required=True, help='Map library file to write.')
        parser.add_argument('--amplitude', type=float, default=defaults['amplitude'])
        parser.add_argument('--kappa', type=float, default=defaults['width_scale'],
                            help='Dipole width relative to the pillar diameter.')
        parser.add_argument('--substeps', type=int, default=defaults['substeps'])

    def run(self, **options):
        params = MapGenParams(
            amplitude=options['amplitude'],
            width_scale=options['kappa'],
            substeps=options['substeps'],
        )
        library = PillarLibrary.build(ChannelSpec(**settings.FLOWSCULPT['CHANNEL']), params)
        atomic_write(options['out'], library_to_bytes(library))
        self.stdout.write(f'wrote {len(library.maps)} maps to {options["out"]}')
        return Artifacts(primary=options['out'], outputs=[options['out']])
