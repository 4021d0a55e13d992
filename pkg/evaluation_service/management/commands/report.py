# evaluation_service/management/commands/report.py

from pathlib import Path

from evaluation_service.services.report_service import report_service
from shared.management.base import PipelineCommand
from shared.utils.artifacts import read_json


class Command(PipelineCommand):
    help = 'Summary tables with best-model flags and plot-ready CSVs from a scored run directory'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('run_dir', nargs='?', default=None, help='Run directory (default: --out)')

    def handle_config(self, config, **options):
        run_dir = Path(options['run_dir']) if options.get('run_dir') else self.resolve_out(config)
        manifest_path = run_dir / 'manifest.json'
        run_info = None
        if manifest_path.is_file():
            manifest = read_json(manifest_path)
            run_info = {'config_hash': manifest.get('config_hash'), 'seed': manifest.get('seed')}
        outputs = report_service.report(run_dir, run_info=run_info)
        self.stdout.write(self.style.SUCCESS(f"Report written: {outputs['summary_md']}"))
        return None
