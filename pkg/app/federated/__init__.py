# app/federated/__init__.py
from .recommender import (ClientUpload, ClipBound, FedSimState, add_noise, aggregate, clip_for,
                          evaluate, local_update)
from .simulator import FederatedSimulator, RoundOutcome, arrival_schedule, run_round

__all__ = [
    'ClientUpload', 'ClipBound', 'FedSimState', 'add_noise', 'aggregate', 'clip_for', 'evaluate',
    'local_update', 'FederatedSimulator', 'RoundOutcome', 'arrival_schedule', 'run_round',
]
