from . import json_api
from . import chat_wrapper
from . import embedding_wrapper
