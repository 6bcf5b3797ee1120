from affine.sampling import KINDS
from runs.commands import RunCommand
from stats.sweeps import CONDITIONINGS


class Command(RunCommand):
    help = 'Monte Carlo sweeps of minimal absorbing set statistics for random contractions'
    run_command = 'stats'

    def add_command_arguments(self, parser):
        parser.add_argument(
            '--kind',
            choices=KINDS,
            action='append',
            help='Contraction kind; repeat for several (default: all kinds)',
        )
        parser.add_argument(
            '--conditioning',
            choices=CONDITIONINGS,
            help='Sweep conditioning (default: lambda_cap_sweep)',
        )
        parser.add_argument(
            '--samples',
            type=int,
            help='Samples per parameter value (default: 20000)',
        )

    def overrides(self, options):
        return {
            'stats.kinds': options.get('kind'),
            'stats.conditioning': options.get('conditioning'),
            'stats.samples_per_point': options.get('samples'),
        }
