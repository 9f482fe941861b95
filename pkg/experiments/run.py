import logging
import sys

import hydra
from omegaconf import DictConfig

from commands import command_output_dir, run_command
from utils.utils import write_error

log = logging.getLogger(__name__)


@hydra.main(config_path="configs", config_name="config", version_base=None)
def main(config: DictConfig) -> None:
    """
    Main function to run a command.

    Args:
        config (DictConfig): Configuration file.
    """
    try:
        artifact = run_command(config)
    except Exception as e:
        log.exception(f"Command {config.command.name} failed")
        path = write_error(command_output_dir(config), config.command.name, e)
        log.error(f"Error report written to {path}")
        sys.exit(1)
    log.info(f"Done: {artifact}")


if __name__ == '__main__':
    main()
