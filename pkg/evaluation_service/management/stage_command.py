# evaluation_service/management/stage_command.py

from shared.management.base import PipelineCommand
from shared.utils.run_config import RunConfig


class StageCommand(PipelineCommand):
    """Runs a fixed subset of pipeline stages against the run directory"""

    stages = ()

    def handle_config(self, config: RunConfig, **options):
        from evaluation_service.services.pipeline_service import pipeline_service

        out = self.resolve_out(config)
        pipeline_service.run(config, out, stages=self.stages)
        self.stdout.write(self.style.SUCCESS(f"{', '.join(self.stages)} finished: {out}"))
        return None
