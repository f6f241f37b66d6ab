"""Session-type runtime verification toolkit.

Type-checks processes against binary session types, synthesizes rejection
monitors, executes the process / monitor / composite semantics for bounded
verification, and deploys synthesized monitors as network proxies.
"""

__version__ = "0.1.0"
