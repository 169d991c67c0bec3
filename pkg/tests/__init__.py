"""Test suite for HTD LR Scheduler."""
