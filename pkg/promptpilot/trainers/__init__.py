from . import train_config
from . import records
from . import metrics
from . import checkpoints
from . import bilevel_trainer
