from runs.commands import RunCommand


class Command(RunCommand):
    help = 'Compute minimal absorbing sets, basin rasters and fixed point scans of single contractions'
    run_command = 'mas'

    def add_command_arguments(self, parser):
        parser.add_argument(
            '--gallery',
            action='store_true',
            default=None,
            help='Add the built-in gallery of planar contractions',
        )
        parser.add_argument(
            '--margin',
            type=int,
            help='Basin window margin around the trap region, in cells (default: 10)',
        )

    def overrides(self, options):
        return {
            'mas.gallery': options.get('gallery'),
            'mas.margin': options.get('margin'),
        }
