from runs.commands import RunCommand, add_shared_arguments


class Command(RunCommand):
    help = 'Analyze the Markov structure of a DIFS or run its random iteration orbit'

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest='action', required=True)

        analyze = subparsers.add_parser('analyze', help='Recurrent classes, stationary distributions and the class bound')
        add_shared_arguments(analyze)
        analyze.add_argument('--scene', type=str, help='Tabulated DIFS file to analyze instead of affine maps')

        run = subparsers.add_parser('run', help='Random iteration orbit and its empirical measure')
        add_shared_arguments(run)
        run.add_argument('--scene', type=str, help='Tabulated DIFS file to iterate instead of affine maps')
        run.add_argument('--steps', type=int, help='Orbit length (default: 100000)')
        run.add_argument('--burn-in', type=int, help='Leading steps left out of the measure (default: 0)')

    def command_name(self, options):
        return f"difs-{options['action']}"

    def overrides(self, options):
        return {
            'difs.scene': options.get('scene'),
            'difs.steps': options.get('steps'),
            'difs.burn_in': options.get('burn_in'),
        }
