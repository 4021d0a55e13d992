# series_service/management/commands/ingest.py

from evaluation_service.management.stage_command import StageCommand


class Command(StageCommand):
    help = 'Load the input bundle (DATA__BUNDLE_DIR or SYNTH__* keys) into the run directory'
    stages = ('ingest',)
