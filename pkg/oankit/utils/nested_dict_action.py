import argparse
import copy

import yaml


class NestedDictAction(argparse.Action):
    """Action class to accumulate dotted overrides into a nested dict.

    Examples:
        >>> parser = argparse.ArgumentParser()
        >>> _ = parser.add_argument('--set', action=NestedDictAction,
        ...                         default={})
        >>> parser.parse_args(['--set', 'tiling.stride=104'])
        Namespace(set={'tiling': {'stride': 104}})
        >>> parser.parse_args(['--set', 'oan.k=4', '--set', 'oan.window_maps=100'])
        Namespace(set={'oan': {'k': 4, 'window_maps': 100}})
        >>> parser.parse_args(['--set', '{seed: 5}'])
        Namespace(set={'seed': 5})

    """

    _syntax = """Syntax:
  {op} <key>=<yaml-string>
  {op} <key>.<key2>=<yaml-string>
  {op} <yaml-mapping>
e.g.
  {op} seed=4
  {op} tiling.patch_size=128
  {op} {{oan: {{k: 4.0}}}}
"""

    def __init__(
        self,
        option_strings,
        dest,
        nargs=None,
        default=None,
        choices=None,
        required=False,
        help=None,
        metavar=None,
    ):
        super().__init__(
            option_strings=option_strings,
            dest=dest,
            nargs=nargs,
            default=copy.deepcopy(default),
            type=None,
            choices=choices,
            required=required,
            help=help,
            metavar=metavar,
        )

    def __call__(self, parser, namespace, values, option_strings=None):
        indict = copy.deepcopy(getattr(namespace, self.dest, None) or {})
        if "=" in values and not values.strip().startswith("{"):
            # --set a.b=3 -> {'a': {'b': 3}}
            key, value = values.split("=", maxsplit=1)
            if not value.strip() == "":
                value = yaml.safe_load(value)

            keys = key.split(".")
            d = indict
            for idx, k in enumerate(keys):
                if idx == len(keys) - 1:
                    d[k] = value
                else:
                    if not isinstance(d.setdefault(k, {}), dict):
                        # Remove the existing value and recreates as empty dict
                        d[k] = {}
                    d = d[k]
        else:
            value = yaml.safe_load(values)
            if not isinstance(value, dict):
                syntax = self._syntax.format(op=option_strings)
                mes = f"must be interpreted as dict: but got {values}\n{syntax}"
                raise argparse.ArgumentError(self, mes)
            deep_update(indict, value)
        setattr(namespace, self.dest, indict)


def deep_update(base: dict, update: dict) -> dict:
    """Recursively merge ``update`` into ``base`` in place.

    Examples:
        >>> deep_update({'a': {'b': 1, 'c': 2}}, {'a': {'b': 5}})
        {'a': {'b': 5, 'c': 2}}
    """
    for k, v in update.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            deep_update(base[k], v)
        else:
            base[k] = copy.deepcopy(v)
    return base
