from dataclasses import dataclass

from data.dataset import Dataset, class_centers, make_blobs
from loaders.config_loader import DatasetConfig
from loaders.idx_loader import load_idx
from utils.seeding import SeedStream, derive_rng, derive_seed


@dataclass
class DatasetPair:
    train: Dataset
    test: Dataset


class DatasetFactory:
    BLOBS = "blobs"
    IDX = "idx"

    @staticmethod
    def create(config: DatasetConfig, seed: int) -> DatasetPair:
        """
        Build the train and test sets of an experiment.

        :param config: The dataset section of the experiment config.
        :param seed: The master seed; blobs share class centers between train and test.

        :return: DatasetPair: the train and test datasets.
        """
        if config.kind == DatasetFactory.IDX:
            return DatasetPair(
                load_idx(config.train_images, config.train_labels, config.num_classes),
                load_idx(config.test_images, config.test_labels, config.num_classes),
            )
        if config.kind != DatasetFactory.BLOBS:
            raise ValueError(f"Unknown dataset kind: {config.kind}")

        centers = class_centers(config.num_classes, config.dim, derive_rng(seed, SeedStream.DATA, 2))
        train = make_blobs(config.num_classes, config.dim, config.n_per_class, config.spread,
                           derive_seed(seed, SeedStream.DATA, 0), centers=centers)
        test = make_blobs(config.num_classes, config.dim, config.test_per_class, config.spread,
                          derive_seed(seed, SeedStream.DATA, 1), centers=centers)
        return DatasetPair(train, test)
