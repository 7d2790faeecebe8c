"""Closed-form energy accounting for the three transmission strategies.

All totals are normalized by the conventional send-everything baseline over
the same stream; coefficients are abstract energy units calibrated in the
shipped defaults, not hardware measurements.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

from .pipeline import PipelineConfig, TransmissionLog, run_stream

DEFAULT_ACCELERATOR_FACTOR = 23.6


@dataclass(frozen=True)
class EnergyParams:
    e_edge: float = 0.05        # per classified segment (ASIC near-sensor inference)
    e_comm: float = 2.0         # per transmitted segment
    e_cloud: float = 8.0        # per segment processed in the cloud
    e_edge_comp: float = 0.1    # per segment, compressive baseline edge work
    compression_ratio: float = 0.5
    p_aoi: float = 0.01
    accelerator_factor: float = DEFAULT_ACCELERATOR_FACTOR

    def __post_init__(self):
        if min(self.e_edge, self.e_comm, self.e_cloud, self.e_edge_comp) < 0:
            raise ValueError("energy coefficients must be non-negative")
        if not 0.0 < self.compression_ratio <= 1.0:
            raise ValueError("compression_ratio must be in (0, 1]")
        if not 0.0 <= self.p_aoi <= 1.0:
            raise ValueError("p_aoi must be in [0, 1]")

    def cpu_gpu_equivalent(self) -> "EnergyParams":
        """Same workload on a CPU/GPU board: only edge inference energy scales."""
        return replace(self, e_edge=self.e_edge * self.accelerator_factor)


@dataclass(frozen=True)
class EnergyReport:
    edge: float
    comm: float
    cloud: float
    normalized_total: float

    @property
    def total(self) -> float:
        return self.edge + self.comm + self.cloud

    @property
    def energy_saving(self) -> float:
        return 1.0 - self.normalized_total

    def fractions(self) -> tuple[float, float, float]:
        t = self.total
        if t == 0:
            return 0.0, 0.0, 0.0
        return self.edge / t, self.comm / t, self.cloud / t


@dataclass(frozen=True)
class TradeoffPoint:
    t_score: float
    energy_saving: float
    quality_loss: float
    transmitted_fraction: float


def _conventional_total(n: int, params: EnergyParams) -> float:
    return n * (params.e_comm + params.e_cloud)


def conventional_energy(n_segments: int, params: EnergyParams) -> EnergyReport:
    """Send-everything baseline: no edge work, every segment shipped and processed."""
    comm = n_segments * params.e_comm
    cloud = n_segments * params.e_cloud
    return EnergyReport(edge=0.0, comm=comm, cloud=cloud,
                        normalized_total=1.0 if n_segments > 0 else 0.0)


def compressive_energy(n_segments: int, params: EnergyParams) -> EnergyReport:
    """Compress at the edge, still transmit and cloud-process every segment."""
    edge = n_segments * params.e_edge_comp
    comm = n_segments * params.e_comm * params.compression_ratio
    cloud = n_segments * params.e_cloud
    baseline = _conventional_total(n_segments, params)
    total = edge + comm + cloud
    return EnergyReport(edge=edge, comm=comm, cloud=cloud,
                        normalized_total=total / baseline if baseline else 0.0)


def ours_energy(log: TransmissionLog, params: EnergyParams) -> EnergyReport:
    """Selective pipeline: edge inference on every segment, comm/cloud per transmission."""
    edge = log.total_count * params.e_edge
    comm = log.transmitted_count * params.e_comm
    cloud = log.transmitted_count * params.e_cloud
    baseline = _conventional_total(log.total_count, params)
    total = edge + comm + cloud
    return EnergyReport(edge=edge, comm=comm, cloud=cloud,
                        normalized_total=total / baseline if baseline else 0.0)


def tradeoff_sweep(cfg: PipelineConfig, segments, params: EnergyParams,
                   thresholds) -> list[TradeoffPoint]:
    """Replay the stream at each threshold; returns points sorted by threshold."""
    segments = list(segments)
    points = []
    for t in sorted(thresholds):
        log = run_stream(replace(cfg, t_score=float(t)), segments)
        report = ours_energy(log, params)
        points.append(TradeoffPoint(t_score=float(t),
                                    energy_saving=report.energy_saving,
                                    quality_loss=log.quality_loss(),
                                    transmitted_fraction=log.transmitted_fraction()))
    return points


def breakdown_rows(n_segments: int, transmitted_by_p_aoi: dict[float, int],
                   params: EnergyParams) -> list[dict]:
    """Per-method edge/comm/cloud fractions and normalized totals per p_aoi.

    ``transmitted_by_p_aoi`` maps each AoI probability to the selective
    pipeline's transmitted segment count on a stream of ``n_segments``.
    """
    rows = []
    for p_aoi in sorted(transmitted_by_p_aoi):
        local = replace(params, p_aoi=p_aoi)
        log = TransmissionLog(total_count=n_segments,
                              transmitted_count=transmitted_by_p_aoi[p_aoi])
        for method, report in (("conventional", conventional_energy(n_segments, local)),
                               ("compressive", compressive_energy(n_segments, local)),
                               ("ours", ours_energy(log, local))):
            edge_f, comm_f, cloud_f = report.fractions()
            rows.append({"p_aoi": p_aoi, "method": method,
                         "edge_fraction": edge_f, "comm_fraction": comm_f,
                         "cloud_fraction": cloud_f,
                         "normalized_total": report.normalized_total})
    return rows


def write_breakdown_csv(path, rows: list[dict], config_hash: str = "") -> None:
    fieldnames = ["p_aoi", "method", "edge_fraction", "comm_fraction",
                  "cloud_fraction", "normalized_total"]
    with open(path, "w", newline="") as f:
        if config_hash:
            f.write(f"# config_hash={config_hash}\n")
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


def write_tradeoff_csv(path, points: list[TradeoffPoint], config_hash: str = "") -> None:
    with open(path, "w", newline="") as f:
        if config_hash:
            f.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(f)
        writer.writerow(["t_score", "energy_saving", "quality_loss", "transmitted_fraction"])
        for p in points:
            writer.writerow([f"{p.t_score:.6f}", f"{p.energy_saving:.6f}",
                             f"{p.quality_loss:.6f}", f"{p.transmitted_fraction:.6f}"])
