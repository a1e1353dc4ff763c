from pathlib import Path

from django.core.management.base import CommandError

from ...blocks import PartitionVector
from ...estimator import Dataset, FitOptions, fit
from ...inference import beta_tests, gamma_tests
from ...serialization import (
    fit_result_to_dict,
    read_matrix_csv,
    tests_to_frame,
    tests_to_records,
    write_json,
)
from ..base import MaudCommand


class Command(MaudCommand):
    help = 'Fit the MAUD regression model to X and Y CSV files and write the estimates as JSON.'

    def add_arguments(self, parser):
        parser.add_argument('x_csv', help='Design matrix X (n x p)')
        parser.add_argument('y_csv', help='Outcome matrix Y (n x R)')
        parser.add_argument('--partition', required=True, help='Community sizes, e.g. 30,40,60')
        parser.add_argument('--out', required=True, help='Output JSON path')
        parser.add_argument('--header', action='store_true', help='CSV files have a header row')
        parser.add_argument('--fdr', type=float, default=None, metavar='ALPHA',
                            help='Benjamini-Hochberg adjustment at this level')
        parser.add_argument('--alpha', type=float, default=0.05)
        parser.add_argument('--df', choices=('t', 'normal'), default='t',
                            help='Reference distribution for coefficient tests')
        parser.add_argument('--fgls-check', action='store_true',
                            help='Also run iterated dense FGLS and report the difference')
        parser.add_argument('--max-iter', type=int, default=None)
        parser.add_argument('--tol', type=float, default=None)
        parser.add_argument('--no-compare-starts', action='store_true')

    def run(self, *args, **options):
        use_fdr = options['fdr'] is not None
        alpha = options['fdr'] if use_fdr else options['alpha']
        if not 0.0 < alpha < 1.0:
            raise CommandError(f"alpha must lie in (0, 1), got {alpha}", returncode=2)

        X, covariate_names = read_matrix_csv(options['x_csv'], header=options['header'])
        Y, feature_names = read_matrix_csv(options['y_csv'], header=options['header'])
        part = PartitionVector.parse(options['partition'])
        data = Dataset(X, Y, part, feature_names=feature_names, covariate_names=covariate_names)

        fit_options = FitOptions().with_overrides(
            tol=options['tol'],
            max_iter=options['max_iter'],
            fgls_check=options['fgls_check'] or None,
            compare_starts=False if options['no_compare_starts'] else None,
        )
        result = fit(data, fit_options)

        betas = beta_tests(result, df_mode=options['df'], alpha=alpha, fdr=use_fdr)
        gammas = gamma_tests(result, alpha=alpha, fdr=use_fdr)

        out = Path(options['out'])
        out.parent.mkdir(parents=True, exist_ok=True)
        payload = fit_result_to_dict(result)
        payload['beta_tests'] = tests_to_records(betas)
        payload['gamma_tests'] = tests_to_records(gammas)
        write_json(out, payload)
        tests_to_frame(betas).to_csv(out.with_name(f"{out.stem}_beta_tests.csv"), index=False)
        tests_to_frame(gammas).to_csv(out.with_name(f"{out.stem}_gamma_tests.csv"), index=False)

        diag = result.diagnostics
        self.stdout.write(
            f"fit: n={data.n} R={data.R} p={data.p} G={part.G} "
            f"iterations={diag.iterations} score_norm={diag.score_norm:.3g} "
            f"rejected={sum(t.rejected for t in betas)}/{len(betas)}"
        )
        self.stdout.write(self.style.SUCCESS(f"Wrote {out}"))
