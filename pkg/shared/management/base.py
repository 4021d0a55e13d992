# shared/management/base.py

import logging
from pathlib import Path
from typing import Any, Dict

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from shared.logging_context import LoggingContext
from shared.utils.exceptions import BaseServiceException, format_exception_report
from shared.utils.run_config import RunConfig, load_run_config

logger = logging.getLogger(__name__)


class PipelineCommand(BaseCommand):
    """
    Base class for pipeline stage commands.

    Adds the shared ``--config/--seed/--jobs/--out`` flags, resolves the run
    configuration and converts service exceptions into process exit codes
    (2 config, 3 data, 4 numerical).
    """

    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument(
            '--config',
            type=str,
            default=None,
            help='Run configuration file (SECTION__KEY=value lines)',
        )
        parser.add_argument(
            '--seed',
            type=int,
            default=None,
            help='Master seed (overrides PIPELINE__SEED)',
        )
        parser.add_argument(
            '--jobs',
            type=int,
            default=None,
            help='Maximum number of parallel origin workers',
        )
        parser.add_argument(
            '--out',
            type=str,
            default=None,
            help='Run directory',
        )

    def load_config(self, options: Dict[str, Any]) -> RunConfig:
        config = load_run_config(options.get('config'))
        pipeline_overrides = {}
        if options.get('seed') is not None:
            pipeline_overrides['seed'] = options['seed']
        if options.get('jobs') is not None:
            pipeline_overrides['jobs'] = options['jobs']
        if options.get('out') is not None:
            pipeline_overrides['out'] = options['out']
        if pipeline_overrides:
            config = config.with_overrides(pipeline=pipeline_overrides)
        return config

    def resolve_out(self, config: RunConfig) -> Path:
        if config.pipeline.out:
            return Path(config.pipeline.out)
        return Path(settings.CARBON_RUNS_DIR) / f"run-{config.config_hash[:12]}"

    def handle(self, *args, **options):
        try:
            config = self.load_config(options)
            handler_options = {k: v for k, v in options.items() if k != 'config'}
            return self.handle_config(config, **handler_options)
        except BaseServiceException as exc:
            format_exception_report(exc, LoggingContext.get_full_context())
            raise CommandError(str(exc), returncode=exc.exit_code)
        finally:
            LoggingContext.clear_context()

    def handle_config(self, config: RunConfig, **options):
        raise NotImplementedError('subclasses of PipelineCommand must provide handle_config()')
