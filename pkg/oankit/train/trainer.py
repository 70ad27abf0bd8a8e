import dataclasses
import logging
from pathlib import Path
import time
from typing import Optional
from typing import Union

import humanfriendly
import torch
from typeguard import check_argument_types

from oankit.gated.abs_gated_model import AbsGatedModel
from oankit.oan.threshold import ThresholdStats
from oankit.oan.threshold import record_stats
from oankit.optimizers.sgd import SgdConfig
from oankit.torch_utils.set_all_random_seed import set_all_random_seed
from oankit.train.dataset import PatchDataset
from oankit.train.dataset import build_loader
from oankit.train.reporter import Reporter
from oankit.train.reporter import SubReporter
from oankit.utils.errors import NumericError


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    # weight of the objectness loss
    lam: float = 4.0
    score_keep_threshold: float = 0.05
    num_scenes: int = 200
    batch_size: int = 16
    log_interval: Optional[int] = None
    use_tensorboard: bool = False
    sgd: SgdConfig = SgdConfig()

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam: must be >= 0, got {self.lam}")
        if not 0 <= self.score_keep_threshold < 1:
            raise ValueError(
                f"score_keep_threshold: must be in [0, 1), "
                f"got {self.score_keep_threshold}"
            )
        if self.num_scenes < 1:
            raise ValueError(f"num_scenes: must be >= 1, got {self.num_scenes}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size: must be >= 1, got {self.batch_size}")


@dataclasses.dataclass
class TrainerOptions:
    max_epoch: int
    seed: int
    batch_size: int
    log_interval: Optional[int]
    use_tensorboard: bool
    output_dir: Union[Path, str]
    stats_window: int


class Trainer:
    """Single-process, single-threaded SGD training of a gated model.

    Besides the usual loss statistics every activation map seen during
    training is pushed into a ``ThresholdStats`` window, from which the
    inference threshold is calibrated afterwards.
    """

    def __init__(self):
        raise RuntimeError("This class can't be instantiated.")

    @classmethod
    def build_options(
        cls, config: TrainConfig, seed: int, output_dir: Union[Path, str], window: int
    ) -> TrainerOptions:
        assert check_argument_types()
        return TrainerOptions(
            max_epoch=config.sgd.epochs,
            seed=seed,
            batch_size=config.batch_size,
            log_interval=config.log_interval,
            use_tensorboard=config.use_tensorboard,
            output_dir=output_dir,
            stats_window=window,
        )

    @classmethod
    def run(
        cls,
        model: AbsGatedModel,
        optimizer: torch.optim.Optimizer,
        scheduler: torch.optim.lr_scheduler.MultiStepLR,
        dataset: PatchDataset,
        options: TrainerOptions,
    ):
        """Train for ``options.max_epoch`` epochs.

        Returns:
            (reporter, threshold stats)
        """
        assert check_argument_types()
        output_dir = Path(options.output_dir)
        reporter = Reporter()
        stats = ThresholdStats(options.stats_window)
        if options.use_tensorboard:
            from torch.utils.tensorboard import SummaryWriter

            summary_writer = SummaryWriter(str(output_dir / "tensorboard"))
        else:
            summary_writer = None

        start_time = time.perf_counter()
        for iepoch in range(1, options.max_epoch + 1):
            if iepoch != 1:
                logging.info(
                    "{}/{}epoch started. Estimated time to finish: {}".format(
                        iepoch,
                        options.max_epoch,
                        humanfriendly.format_timespan(
                            (time.perf_counter() - start_time)
                            / (iepoch - 1)
                            * (options.max_epoch - iepoch + 1)
                        ),
                    )
                )
            else:
                logging.info(f"{iepoch}/{options.max_epoch}epoch started")
            set_all_random_seed(options.seed + iepoch, deterministic=True)

            loader = build_loader(
                dataset, options.batch_size, seed=options.seed + iepoch
            )
            with reporter.observe("train", iepoch) as sub_reporter:
                cls.train_one_epoch(
                    model=model,
                    loader=loader,
                    optimizer=optimizer,
                    reporter=sub_reporter,
                    threshold_stats=stats,
                    summary_writer=summary_writer,
                    options=options,
                )
            scheduler.step()

            logging.info(reporter.log_message())
            reporter.matplotlib_plot(output_dir / "images")
            if summary_writer is not None:
                reporter.tensorboard_add_scalar(summary_writer)

        logging.info(f"The training was finished at {options.max_epoch} epochs")
        if summary_writer is not None:
            summary_writer.close()
        return reporter, stats

    @classmethod
    def train_one_epoch(
        cls,
        model: AbsGatedModel,
        loader,
        optimizer: torch.optim.Optimizer,
        reporter: SubReporter,
        threshold_stats: ThresholdStats,
        summary_writer,
        options: TrainerOptions,
    ):
        log_interval = options.log_interval
        if log_interval is None:
            log_interval = max(len(loader) // 20, 10)

        model.train()
        for iiter, (_, batch) in enumerate(loader, 1):
            start = time.perf_counter()
            retval = model(**batch)
            forward_time = time.perf_counter() - start
            loss = retval["loss"]
            if not bool(torch.isfinite(loss)):
                raise NumericError(
                    f"non-finite loss {float(loss)} at epoch {reporter.epoch}, "
                    f"iteration {iiter}"
                )
            record_stats(threshold_stats, retval["activation"])

            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            reporter.register(
                dict(
                    retval["stats"],
                    lr=optimizer.param_groups[0]["lr"],
                    forward_time=forward_time,
                ),
                retval["weight"],
            )

            if iiter % log_interval == 0:
                logging.info(reporter.log_message(-log_interval))
                if summary_writer is not None:
                    reporter.tensorboard_add_scalar(summary_writer, -log_interval)
