from .service import Datastream, PlatformService, Thing
from .tokens import TokenStore

__all__ = ["PlatformService", "Thing", "Datastream", "TokenStore"]
