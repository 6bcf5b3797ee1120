from runs.commands import RunCommand


class Command(RunCommand):
    help = 'Render the invariant measure of a DIFS as a PPM image'
    run_command = 'render'

    def add_command_arguments(self, parser):
        parser.add_argument(
            '--scene',
            type=str,
            help='Tabulated DIFS file to render instead of affine maps',
        )
        parser.add_argument(
            '--steps',
            type=int,
            help='Orbit length (default: 1000000)',
        )
        parser.add_argument(
            '--burn-in',
            type=int,
            help='Leading steps left out of the image (default: 1000)',
        )
        parser.add_argument(
            '--gamma',
            type=float,
            help='Tone mapping exponent (default: DIFS_SETTINGS DEFAULT_GAMMA)',
        )

    def overrides(self, options):
        return {
            'render.scene': options.get('scene'),
            'render.steps': options.get('steps'),
            'render.burn_in': options.get('burn_in'),
            'render.gamma': options.get('gamma'),
        }
