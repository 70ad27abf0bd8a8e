from typing import Dict

import humanfriendly
import numpy as np
import torch


def get_human_readable_count(number: int) -> str:
    """Abbreviate an integer number with K, M, B, T.

    Examples:
        >>> get_human_readable_count(123)
        '123.00  '
        >>> get_human_readable_count(4620000)
        '4.62 M'
    """
    assert number >= 0
    labels = [" ", "K", "M", "B", "T"]
    num_digits = int(np.floor(np.log10(number)) + 1 if number > 0 else 1)
    num_groups = int(np.ceil(num_digits / 3))
    num_groups = min(num_groups, len(labels))
    shift = -3 * (num_groups - 1)
    number = number * (10**shift)
    return f"{number:.2f} {labels[num_groups - 1]}"


def to_bytes(dtype) -> int:
    # torch.float32 -> 4
    return int(str(dtype)[-2:]) // 8


def count_parameters(module: torch.nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def count_parameters_by_part(model: torch.nn.Module) -> Dict[str, int]:
    """Parameter count of each direct child, plus ``total``."""
    counts = {name: count_parameters(child) for name, child in model.named_children()}
    counts["total"] = count_parameters(model)
    return counts


def model_summary(model: torch.nn.Module) -> str:
    message = "Model structure:\n"
    message += str(model)
    tot_params = count_parameters(model)
    num_params = sum(p.numel() for p in model.parameters() if p.requires_grad)
    percent_trainable = "{:.1f}".format(num_params * 100.0 / max(tot_params, 1))
    message += "\n\nModel summary:\n"
    message += f"    Class Name: {model.__class__.__name__}\n"
    for name, count in count_parameters_by_part(model).items():
        if name != "total":
            message += f"    Parameters of {name}: {get_human_readable_count(count)}\n"
    message += (
        "    Total Number of model parameters: "
        f"{get_human_readable_count(tot_params)}\n"
    )
    message += (
        f"    Number of trainable parameters: {get_human_readable_count(num_params)}"
        f" ({percent_trainable}%)\n"
    )
    num_bytes = humanfriendly.format_size(
        sum(
            p.numel() * to_bytes(p.dtype) for p in model.parameters() if p.requires_grad
        )
    )
    message += f"    Size: {num_bytes}\n"
    dtype = next(iter(model.parameters())).dtype
    message += f"    Type: {dtype}"
    return message
