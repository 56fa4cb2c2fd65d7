from . import base
from . import chain_world
from . import four_room
from . import overcooked
