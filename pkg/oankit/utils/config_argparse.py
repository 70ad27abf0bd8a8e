import argparse
from pathlib import Path

import yaml

from oankit.utils.errors import ConfigError
from oankit.utils.nested_dict_action import NestedDictAction


class ArgumentParser(argparse.ArgumentParser):
    """ArgumentParser supporting a structured run-config file

    - Automatically adding "--config" and "--set" as options.
    - The config file is yaml (json is accepted as a yaml subset).
    - Unlike flat argparse defaults, the file is kept as a nested mapping
      in ``namespace.config_dict`` and validated later against RunConfig,
      so every violation can be reported at once.
    - A missing config file is reported through ``self.error`` (exit 2).
    - A file that is not valid yaml is kept as ``namespace.config_error``
      and raised by the command, so it exits like any config violation.

    """

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.add_argument("--config", help="Give run config file in yaml/json format")
        self.add_argument(
            "--set",
            action=NestedDictAction,
            default=dict(),
            help="Override a config entry, e.g. --set tiling.stride=104",
        )

    def parse_known_args(self, args=None, namespace=None):
        namespace, rest = super().parse_known_args(args, namespace)
        config = getattr(namespace, "config", None)
        namespace.config_dict = {}
        namespace.config_error = None
        if config is not None:
            if not Path(config).exists():
                self.error(f"No such file: {config}")

            with open(config, "r", encoding="utf-8") as f:
                try:
                    d = yaml.safe_load(f)
                except yaml.YAMLError as e:
                    namespace.config_error = ConfigError([f"{config}: {e}"])
                    return namespace, rest
            # NOTE: a non-mapping file is a config violation (exit 3),
            #   reported when the RunConfig is resolved.
            namespace.config_dict = d if d is not None else {}
        return namespace, rest
