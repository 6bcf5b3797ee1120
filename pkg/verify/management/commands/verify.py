from PyDIFS.exceptions import ConfigValidationError
from runs.commands import RunCommand


class Command(RunCommand):
    help = 'Check attractor and invariant measure convergence of a discretized hyperbolic IFS'
    run_command = 'verify'

    def add_command_arguments(self, parser):
        parser.add_argument(
            '--deltas',
            type=str,
            help='Comma-separated grid spacings (default: 1/32,1/64,1/128,1/256)',
        )
        parser.add_argument(
            '--functions',
            type=str,
            help='Comma-separated test functions from one,x,y,r2,xy (default: one,x,y,r2)',
        )
        parser.add_argument(
            '--elton-steps',
            type=int,
            help='Exact chain length for the reference integrals (default: DIFS_SETTINGS ELTON_STEPS)',
        )

    def overrides(self, options):
        deltas = options.get('deltas')
        functions = options.get('functions')
        return {
            'verify.deltas': [parse_spacing(v) for v in deltas.split(',')] if deltas else None,
            'verify.functions': [v.strip() for v in functions.split(',')] if functions else None,
            'verify.elton_steps': options.get('elton_steps'),
        }


def parse_spacing(text: str) -> float:
    """'1/64' or '0.015625'."""
    text = text.strip()
    try:
        if '/' in text:
            numerator, denominator = text.split('/', 1)
            return float(numerator) / float(denominator)
        return float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigValidationError(
            f"bad grid spacing {text!r}", field_errors={'verify.deltas': [f"cannot parse {text!r}"]}
        ) from exc
