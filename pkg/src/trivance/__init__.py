"""Generate, verify and cost AllReduce schedules on rings and tori."""

__version__ = "0.1.0"
