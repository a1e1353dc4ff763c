from pathlib import Path

from django.core.management.base import CommandError

from ...scenarios import is_valid_scenario, load_scenario
from ...serialization import read_scenario, write_report
from ...simulation import configs_from_dict, run_study
from ..base import MaudCommand


class Command(MaudCommand):
    help = 'Run a Monte-Carlo study from a scenario file (JSON or key/value) or a registered scenario name.'

    def add_arguments(self, parser):
        parser.add_argument(
            'scenario_file', nargs='?',
            help='Scenario file: .json, or key/value sections [scenario] and [variant:LABEL]',
        )
        parser.add_argument('--scenario', help='Registered scenario name')
        parser.add_argument('--out', required=True, help='Output directory')
        parser.add_argument('--replicates', type=int, default=None)
        parser.add_argument('--workers', type=int, default=None)
        parser.add_argument('--seed', type=int, default=None)
        parser.add_argument('--variant', default=None, help='Only run the variant with this label')

    def _load(self, options):
        if options['scenario']:
            if not is_valid_scenario(options['scenario']):
                raise CommandError(f"Unknown scenario {options['scenario']!r}", returncode=2)
            return load_scenario(options['scenario'])
        if options['scenario_file']:
            path = Path(options['scenario_file'])
            if path.exists():
                return read_scenario(path)
            if is_valid_scenario(options['scenario_file']):
                return load_scenario(options['scenario_file'])
            raise CommandError(f"Scenario file {path} not found", returncode=2)
        raise CommandError('Give a scenario file or --scenario NAME', returncode=2)

    def run(self, *args, **options):
        spec = self._load(options)
        if options['replicates'] is not None:
            spec['replicates'] = options['replicates']
        if options['seed'] is not None:
            spec['seed'] = options['seed']
        if options['variant']:
            spec['variants'] = [v for v in spec.get('variants', []) if v.get('label') == options['variant']]
            if not spec['variants']:
                raise CommandError(f"Scenario has no variant {options['variant']!r}", returncode=2)

        out = Path(options['out'])
        for cfg in configs_from_dict(spec):
            report = run_study(cfg, workers=options['workers'])
            write_report(report, out / cfg.name)
            losses = report.losses['maud']
            self.stdout.write(
                f"{cfg.name}: replicates={cfg.replicates} failures={report.failures} "
                f"median_loss_frobenius={losses['frobenius']:.4g}"
            )
        self.stdout.write(self.style.SUCCESS(f"Wrote reports under {out}"))
