from .running import RunningMoments

__all__ = ["RunningMoments"]
