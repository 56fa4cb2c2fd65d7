from . import returns
from . import prompt_policy
from . import selectors
from . import action_policy
