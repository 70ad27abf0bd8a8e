import random

import numpy as np
import torch


def set_all_random_seed(seed: int, deterministic: bool = False):
    """Seed python, numpy and torch.

    With ``deterministic`` torch also runs single-threaded so repeated runs
    are bitwise identical.
    """
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.random.manual_seed(seed)
    if deterministic:
        torch.set_num_threads(1)
