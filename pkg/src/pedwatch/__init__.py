"""pedwatch: privacy-preserving pedestrian activity monitoring.

Converts per-frame tracked-object streams at a signalized intersection into
conflict events, crossing-violation events, hourly textual reports, and
historical analyses served over HTTP.
"""

__version__ = "0.1.0"
