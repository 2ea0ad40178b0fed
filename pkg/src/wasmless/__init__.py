"""Lightweight WebAssembly function-as-a-service runtime with fuel metering."""

__version__ = "0.1.0"
