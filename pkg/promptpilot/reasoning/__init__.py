from . import cot_cache
from . import templates
from . import candidates
from . import reasoner
