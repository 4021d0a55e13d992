# series_service/management/commands/factors.py

from evaluation_service.management.stage_command import StageCommand


class Command(StageCommand):
    help = 'Principal-component factor diagnostics of the first estimation window'
    stages = ('factors',)
