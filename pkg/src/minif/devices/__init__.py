"""Simulated control points: motors, power supplies, digitizers, sensors."""

from .core import (DeviceCore, BadAttrs, NotReserved, WrongKey, OutOfLimits,
                   OverLimit, Aborted, BadArgs, WaveRecord, build_device, DEVICE_KINDS)
from .motor import Motor
from .supply import Supply
from .digitizer import Digitizer
from .sensor import Sensor

__all__ = [
    "DeviceCore", "BadAttrs", "NotReserved", "WrongKey", "OutOfLimits",
    "OverLimit", "Aborted", "BadArgs", "WaveRecord", "build_device", "DEVICE_KINDS",
    "Motor", "Supply", "Digitizer", "Sensor",
]
