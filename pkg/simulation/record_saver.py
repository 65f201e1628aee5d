import json
import os

from asyncio import Lock
from datetime import datetime
from typing import Dict, List, Sequence

import aiofiles

from loaders.config_loader import ExperimentConfig
from models.checkpoint import dump_parameters
from models.round_record import CSV_HEADER
from simulation.orchestrator import ExperimentResult, SeedSummary
from utils.clogger import CLogger
from utils.seeding import describe_hierarchy

SUMMARY_HEADER = ["entry", "seed", "top_g_acc", "l_acc_at_top", "best_round"]


def _csv(rows: Sequence[Sequence]) -> str:
    return "".join(",".join(str(value) for value in row) + "\n" for row in rows)


class RecordSaver:
    """
    Writes the artifacts of experiment runs inside one output directory.

    Paths are never reused: a file that already exists gets a counter suffix instead of
    being overwritten. All writes go through one lock so a sweep's files appear in order.
    """

    def __init__(self, directory: str, timestamp: str = None):
        """
        :param directory: Output directory, created on first write.
        :param timestamp: Fixed stamp for file names; defaults to the current time.
        """
        self._lock = Lock()
        self.directory = os.path.abspath(directory)
        self.timestamp = timestamp or datetime.now().strftime("%Y%m%d-%H%M%S")
        self.written: List[str] = []
        self._reserved = set()

        self._logger = CLogger.for_component("RecordSaver")

    def unique_path(self, stem: str, extension: str) -> str:
        """A fresh path ``<dir>/<stem>_<timestamp>[_k].<extension>`` inside the output directory."""
        name = os.path.basename(stem.replace(os.sep, "_"))
        base = os.path.join(self.directory, f"{name}_{self.timestamp}")
        path, counter = f"{base}.{extension}", 1
        while os.path.exists(path) or path in self._reserved:
            path = f"{base}_{counter}.{extension}"
            counter += 1
        if os.path.commonpath([self.directory, os.path.abspath(path)]) != self.directory:
            raise ValueError(f"refusing to write outside the output directory: {path}")
        self._reserved.add(path)
        return path

    async def _write(self, path: str, content, binary: bool = False) -> str:
        async with self._lock:
            os.makedirs(self.directory, exist_ok=True)
            async with aiofiles.open(path, mode="wb" if binary else "w", **({} if binary else {"newline": ""})) \
                    as file:
                await file.write(content)
            self.written.append(path)
            self._logger.debug(f"wrote {path}")
        return path

    async def save_run(self, config: ExperimentConfig, result: ExperimentResult, entry: str = None) -> Dict[str, str]:
        """
        Save the round CSV and the manifest of one seed, plus whichever optional artifacts are enabled.

        :return: artifact kind -> written path
        """
        output = config.output
        stem = f"{entry or output.run_name}_seed{result.seed}"
        paths = {"rounds": self.unique_path(stem, "csv")}
        await self._write(paths["rounds"], _csv([CSV_HEADER] + [record.to_row() for record in result.records]))

        if output.export_partitions:
            paths["partition"] = self.unique_path(f"{stem}_partition", "csv")
            await self._write(paths["partition"],
                              _csv([["client_id", "sample_index"]] + list(result.partition.rows())))
            paths["index_maps"] = self.unique_path(f"{stem}_index_maps", "csv")
            rows = [[client_id, layer, index] for client_id, index_map in sorted(result.index_maps.items())
                    for layer, index in index_map.rows()]
            await self._write(paths["index_maps"], _csv([["client_id", "layer", "index"]] + rows))

        if output.dump_synthetic and result.synthetic:
            dim = result.synthetic[0][1].samples.shape[1]
            rows = [[round_index, int(label)] + [f"{value:.10g}" for value in sample]
                    for round_index, batch in result.synthetic
                    for sample, label in zip(batch.samples, batch.labels)]
            paths["synthetic"] = self.unique_path(f"{stem}_synthetic", "csv")
            await self._write(paths["synthetic"], _csv([["round", "label"] + [f"f{d}" for d in range(dim)]] + rows))

        if output.save_checkpoint:
            paths["checkpoint"] = self.unique_path(f"{stem}_global", "ckpt")
            await self._write(paths["checkpoint"], dump_parameters(result.final_params), binary=True)

        paths["manifest"] = self.unique_path(f"{stem}_manifest", "json")
        manifest = {
            "config": dict(config.to_dict(), seeds=[result.seed]),
            "seed": result.seed,
            "seed_hierarchy": describe_hierarchy(),
            "summary": {"top_g_acc": result.summary.top_g_acc, "l_acc_at_top": result.summary.l_acc_at_top,
                        "best_round": result.summary.best_round},
            "artifacts": {kind: os.path.basename(path) for kind, path in paths.items() if kind != "manifest"},
        }
        await self._write(paths["manifest"], json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        self._logger.info(f"seed {result.seed}: results saved to {paths['rounds']}")
        return paths

    async def save_summary(self, entries: Dict[str, Sequence[ExperimentResult]],
                           summaries: Dict[str, SeedSummary], name: str = "sweep_summary") -> str:
        """One line per (entry, seed), then a mean +- std line per entry."""
        rows: List[List] = [SUMMARY_HEADER]
        for entry, results in entries.items():
            for result in results:
                rows.append([entry, result.seed, f"{result.summary.top_g_acc:.10g}",
                             f"{result.summary.l_acc_at_top:.10g}", result.summary.best_round])
        rows.append([])
        rows.append(["entry", "seeds", "mean_top_g_acc", "std_top_g_acc", "mean_l_acc", "std_l_acc"])
        for entry, summary in summaries.items():
            rows.append([entry, " ".join(str(seed) for seed in summary.seeds),
                         f"{summary.mean_top_g_acc:.10g}", f"{summary.std_top_g_acc:.10g}",
                         f"{summary.mean_l_acc:.10g}", f"{summary.std_l_acc:.10g}"])
        return await self._write(self.unique_path(name, "csv"), _csv(rows))
