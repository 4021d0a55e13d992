# series_service/management/commands/synth.py

from pathlib import Path

from django.conf import settings

from evaluation_service.services.pipeline_service import pipeline_service
from shared.management.base import PipelineCommand
from shared.utils.artifacts import sha256_json


class Command(PipelineCommand):
    help = 'Generate a synthetic input bundle from the SYNTH__* keys of the run configuration'

    def handle_config(self, config, **options):
        if config.pipeline.out:
            out = Path(config.pipeline.out)
        else:
            digest = sha256_json({'synth': config.synth, 'seed': config.pipeline.seed})
            out = Path(settings.CARBON_RUNS_DIR) / f"bundle-{digest[:12]}"
        pipeline_service.synthesize(config, out)
        self.stdout.write(self.style.SUCCESS(f"Synthetic bundle written: {out}"))
        return None
