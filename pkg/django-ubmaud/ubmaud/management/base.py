"""
Shared plumbing for the ubmaud management commands.

Maps the package's exceptions to ``CommandError`` with the documented exit
codes (2 parse error, 3 dimension or partition mismatch, 4 numerical
failure) and lowers the ``ubmaud`` log level for ``-v 2`` and above.
"""
import logging

from django.core.management.base import BaseCommand, CommandError

from ..exceptions import MaudError


class MaudCommand(BaseCommand):
    """Base class: subclasses implement ``run`` instead of ``handle``."""

    def handle(self, *args, **options):
        if options.get('verbosity', 1) >= 2:
            logging.getLogger('ubmaud').setLevel(logging.DEBUG)
        try:
            return self.run(*args, **options)
        except MaudError as exc:
            raise CommandError(str(exc), returncode=exc.exit_code)

    def run(self, *args, **options):
        raise NotImplementedError('subclasses of MaudCommand must provide a run() method')
