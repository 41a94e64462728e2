"""HMTD: prescription-enforced maintenance interventions over simulated RFID tags.

The package provides the tag memory codec, the intervention state machine,
an append-only trace ledger, offline/online context resolution, remote-expert
assistance sessions, a task/interaction-model analyzer, and the HTTP service
plus CLI that tie them together.
"""

__version__ = "0.1.0"
