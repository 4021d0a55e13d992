# evaluation_service/management/commands/run.py

from evaluation_service.services.pipeline_service import pipeline_service
from shared.management.base import PipelineCommand
from shared.utils.artifacts import read_json


class Command(PipelineCommand):
    help = 'Run the pipeline stages named by PIPELINE__STAGES (all by default)'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            '--stages',
            type=str,
            default=None,
            help='Comma-separated subset of stages (overrides PIPELINE__STAGES)',
        )

    def handle_config(self, config, **options):
        stages = None
        if options.get('stages'):
            stages = [s.strip() for s in options['stages'].split(',') if s.strip()]
        out = self.resolve_out(config)
        pipeline_service.run(config, out, stages=stages)
        manifest = read_json(out / 'manifest.json')
        self.stdout.write(self.style.SUCCESS(f"Run finished: {out}"))
        self.stdout.write(f"manifest hash: {manifest['manifest_hash']}")
        return None
