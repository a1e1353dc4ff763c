from django.core.management.base import CommandError

from ...oracles import SCALES, run_validation_suite
from ..base import MaudCommand


class Command(MaudCommand):
    help = 'Check every closed-form identity against dense oracles on random instances.'

    def add_arguments(self, parser):
        parser.add_argument('--scale', choices=sorted(SCALES), default='small')
        parser.add_argument('--seed', type=int, default=0)

    def run(self, *args, **options):
        results = run_validation_suite(options['scale'], options['seed'], progress=self.stdout.write)
        width = max(len(r.name) for r in results)
        for r in results:
            status = self.style.SUCCESS('PASS') if r.passed else self.style.ERROR('FAIL')
            self.stdout.write(f"{r.name:<{width}}  max_err={r.max_error:.3e}  tol={r.tolerance:.0e}  n={r.count}  {status}")
        failed = [r.name for r in results if not r.passed]
        if failed:
            raise CommandError(f"Oracle checks failed: {', '.join(failed)}", returncode=1)
