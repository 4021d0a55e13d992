# series_service/management/commands/interpolate.py

from evaluation_service.management.stage_command import StageCommand


class Command(StageCommand):
    help = 'Chow-Lin interpolation of annual emissions to monthly on the full sample'
    stages = ('interpolate',)
