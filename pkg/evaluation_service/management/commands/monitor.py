# evaluation_service/management/commands/monitor.py

from evaluation_service.management.stage_command import StageCommand


class Command(StageCommand):
    help = 'Demand and price pressure indices from the backtest records'
    stages = ('monitor',)
