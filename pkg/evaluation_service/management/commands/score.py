# evaluation_service/management/commands/score.py

from evaluation_service.management.stage_command import StageCommand


class Command(StageCommand):
    help = 'Score the backtest records against the benchmark (RMSFE, SR, qCRPS, DM, PT, fluctuation)'
    stages = ('score',)
