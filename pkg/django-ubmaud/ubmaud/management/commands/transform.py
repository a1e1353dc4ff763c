import json

from django.core.management.base import CommandError

from ...params import (
    GammaVector,
    RhoVector,
    gamma_to_omega,
    gamma_to_rho,
    gamma_to_sigma,
    gamma_to_upsilon,
    rho_to_gamma,
    sigma_to_gamma,
)
from ...serialization import (
    NumpyJSONEncoder,
    params_from_dict,
    params_to_dict,
    read_json,
    ub_from_dict,
    ub_to_dict,
    write_json,
)
from ..base import MaudCommand

TARGETS = ('gamma', 'rho', 'upsilon', 'omega', 'sigma')


class Command(MaudCommand):
    help = 'Convert between gamma, rho, Upsilon, Omega and Sigma.'

    def add_arguments(self, parser):
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument('--gamma', help='gamma JSON file')
        source.add_argument('--rho', help='rho JSON file')
        source.add_argument('--sigma', help='UB Sigma JSON file')
        parser.add_argument('--partition', help='Community sizes when the input omits them')
        parser.add_argument('--to', choices=TARGETS, required=True)
        parser.add_argument('--out', help='Output JSON path (default: stdout)')
        parser.add_argument('--principal-only', action='store_true',
                            help='Do not search non-principal square roots of Omega')

    def _source_gamma(self, options) -> GammaVector:
        if options['gamma']:
            vector = params_from_dict(read_json(options['gamma']), options['partition'])
            return rho_to_gamma(vector) if isinstance(vector, RhoVector) else vector
        if options['rho']:
            payload = read_json(options['rho'])
            if isinstance(payload, list):
                vector = RhoVector(payload, params_from_dict(payload, options['partition']).part)
            else:
                payload = {**payload, 'kind': 'rho'}
                vector = params_from_dict(payload, options['partition'])
            return rho_to_gamma(vector)
        sigma = ub_from_dict(read_json(options['sigma']), options['partition'])
        return sigma_to_gamma(sigma, search=not options['principal_only'])

    def run(self, *args, **options):
        gamma = self._source_gamma(options)
        target = options['to']
        if target == 'gamma':
            payload = params_to_dict(gamma)
        elif target == 'rho':
            payload = params_to_dict(gamma_to_rho(gamma))
        elif target == 'upsilon':
            payload = ub_to_dict(gamma_to_upsilon(gamma))
        elif target == 'omega':
            payload = ub_to_dict(gamma_to_omega(gamma))
        elif target == 'sigma':
            payload = ub_to_dict(gamma_to_sigma(gamma))
        else:
            raise CommandError(f"Unknown target {target!r}", returncode=2)

        if options['out']:
            write_json(options['out'], payload)
            self.stdout.write(self.style.SUCCESS(f"Wrote {options['out']}"))
        else:
            self.stdout.write(json.dumps(payload, cls=NumpyJSONEncoder))
