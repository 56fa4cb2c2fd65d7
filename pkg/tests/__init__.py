from . import test_acceptance
from . import test_action_policy
from . import test_apis
from . import test_cli
from . import test_db
from . import test_embeddings
from . import test_envs
from . import test_metrics
from . import test_prompt_policy
from . import test_reasoning
from . import test_selectors
from . import test_trainer
