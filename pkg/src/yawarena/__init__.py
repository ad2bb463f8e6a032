"""Adversarial co-training arena for wind-farm yaw control under sensor
spoofing: a simplified dynamic wake simulator, from-scratch PPO, three
co-training schedules, and a cross-evaluation gauntlet."""

__version__ = "0.1.0"
