from damic.commands import init
from damic.commands.ablation import Ablation
from damic.commands.evaluate import Evaluate
from damic.commands.generate import Generate
from damic.commands.pretrain import Pretrain
from damic.commands.train import Train

__all__ = ['init', 'Ablation', 'Evaluate', 'Generate', 'Pretrain', 'Train']
