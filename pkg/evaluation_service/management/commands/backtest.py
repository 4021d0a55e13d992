# evaluation_service/management/commands/backtest.py

from evaluation_service.management.stage_command import StageCommand


class Command(StageCommand):
    help = 'Expanding-window backtest: fit every model at every origin and write forecast records'
    stages = ('backtest',)
