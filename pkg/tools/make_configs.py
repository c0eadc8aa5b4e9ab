#!/usr/bin/env python3
"""Regenerate the bundled SoC and workload configuration files.

Run from the repository root:  python tools/make_configs.py

Latency profiles come from published per-task execution measurements on
Cortex-A7/A15 class cores and fixed-function accelerators. Power, thermal,
and area numbers are illustrative calibrations for a 28nm-class SoC, chosen
so the bundled design-space studies land in realistic ranges; they are
configuration data, not silicon measurements.
"""
import json
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "src" / "dssim" / "data"

# Operating points: (voltage V, frequency MHz)
BIG_OPPS = [
    {"voltage_v": 0.9125, "frequency_mhz": 600},
    {"voltage_v": 0.9625, "frequency_mhz": 800},
    {"voltage_v": 1.0125, "frequency_mhz": 1000},
    {"voltage_v": 1.0625, "frequency_mhz": 1200},
    {"voltage_v": 1.1125, "frequency_mhz": 1400},
    {"voltage_v": 1.1875, "frequency_mhz": 1600},
    {"voltage_v": 1.2750, "frequency_mhz": 1800},
    {"voltage_v": 1.3625, "frequency_mhz": 2000},
]
LITTLE_OPPS = [
    {"voltage_v": 0.9000, "frequency_mhz": 600},
    {"voltage_v": 0.9500, "frequency_mhz": 800},
    {"voltage_v": 1.0000, "frequency_mhz": 1000},
    {"voltage_v": 1.0500, "frequency_mhz": 1200},
    {"voltage_v": 1.1125, "frequency_mhz": 1400},
]
ACC_OPPS = [{"voltage_v": 0.9, "frequency_mhz": 600}]

# Per-task latency profiles (us) at the maximum OPP.
A15_PROFILE = {
    "wifi-scramble-encode": 10, "wifi-interleave": 4, "wifi-qpsk-mod": 8,
    "wifi-pilot-insert": 3, "wifi-ifft": 118, "wifi-crc": 3,
    "wifi-match-filter": 5, "wifi-payload-extract": 4, "wifi-fft": 115,
    "wifi-pilot-extract": 3, "wifi-qpsk-demod": 95, "wifi-deinterleave": 9,
    "wifi-viterbi-decode": 738, "wifi-descramble": 2,
    "pd-fft": 15, "pd-vector-multiply": 35, "pd-ifft": 15,
    "pd-amplitude": 40, "pd-fft-shift": 3,
    "rd-lfm-gen": 60, "rd-fft": 60, "rd-vector-multiply": 60,
    "rd-ifft": 60, "rd-detect": 20,
    "sc-encode": 8, "sc-mod": 10, "sc-pulse-shape": 12, "sc-crc": 3,
    "sc-sync": 10, "sc-demod": 25, "sc-equalize": 18, "sc-decode": 30,
}
A7_PROFILE = {
    "wifi-scramble-encode": 22, "wifi-interleave": 10, "wifi-qpsk-mod": 15,
    "wifi-pilot-insert": 5, "wifi-ifft": 296, "wifi-crc": 5,
    "wifi-match-filter": 16, "wifi-payload-extract": 8, "wifi-fft": 290,
    "wifi-pilot-extract": 5, "wifi-qpsk-demod": 191, "wifi-deinterleave": 16,
    "wifi-viterbi-decode": 1828, "wifi-descramble": 3,
    "pd-fft": 35, "pd-vector-multiply": 100, "pd-ifft": 35,
    "pd-amplitude": 70, "pd-fft-shift": 7,
    "rd-lfm-gen": 90, "rd-fft": 150, "rd-vector-multiply": 75,
    "rd-ifft": 150, "rd-detect": 20,
    "sc-encode": 14, "sc-mod": 18, "sc-pulse-shape": 20, "sc-crc": 5,
    "sc-sync": 18, "sc-demod": 50, "sc-equalize": 33, "sc-decode": 55,
}
FFT_ACC_PROFILE = {
    "wifi-ifft": 16, "wifi-fft": 12,
    "pd-fft": 6, "pd-ifft": 6,
    "rd-fft": 30, "rd-ifft": 30,
}
VITERBI_ACC_PROFILE = {"wifi-viterbi-decode": 2}
SCRAMBLER_ACC_PROFILE = {"wifi-scramble-encode": 8}

# Power coefficients: dynamic C (F), activity, leakage a, b with
# P_static = V * (a*T + b). Accelerators are gated when idle (zero leakage).
BIG_POWER = {"cap_f": 1.02e-10, "activity": 1.0, "leak_a": 3.5e-4, "leak_b": 0.02}
LITTLE_POWER = {"cap_f": 0.60e-10, "activity": 1.0, "leak_a": 1.75e-4, "leak_b": 0.01}
ACC_POWER = {"cap_f": 0.80e-10, "activity": 1.0, "leak_a": 0.0, "leak_b": 0.0}

BIG_AREA = 1.2
LITTLE_AREA = 0.45
FFT_AREA = 0.3375
VITERBI_AREA = 0.27
SCRAMBLER_AREA = 0.08
UNCORE_AREA = 8.34   # calibrated so the 8-core baseline totals 14.94 mm2

NOC = {
    "bandwidth_bytes_per_us": 16000,
    "load_latency_us": [[0.0, 0.0], [1.0, 0.0]],
    "link_capacity": 64,
}
DRAM = {
    "window_us": 100.0,
    # 50 ns flat to 80% of peak bandwidth, rising to 400 ns at saturation.
    "table": [[0.0, 50.0], [12800.0, 50.0], [16000.0, 400.0]],
}
THERMAL = {
    "big": {"r_k_per_w": 35.0, "c_j_per_k": 0.025, "ambient_c": 25.0,
            "trip_c": 95.0, "hysteresis_c": 5.0},
    "little": {"r_k_per_w": 50.0, "c_j_per_k": 0.015, "ambient_c": 25.0,
               "trip_c": 95.0, "hysteresis_c": 5.0},
    "default": {"r_k_per_w": 40.0, "c_j_per_k": 0.02, "ambient_c": 25.0,
                "trip_c": 95.0, "hysteresis_c": 5.0},
}


def pe(pe_id, name, pe_type, subtype, cluster, capacity, opps, profile, power,
       area, policy="ondemand"):
    return {
        "id": pe_id, "name": name, "type": pe_type, "subtype": subtype,
        "cluster": cluster, "capacity": capacity, "opps": opps,
        "latency_profile_us": profile, "power": power, "area_mm2": area,
        "dvfs_policy": policy,
    }


def big_core(pe_id, i):
    return pe(pe_id, f"big-{i}", "general-core", "big-core", "big", 1,
              BIG_OPPS, A15_PROFILE, BIG_POWER, BIG_AREA)


def little_core(pe_id, i):
    return pe(pe_id, f"little-{i}", "general-core", "little-core", "little", 1,
              LITTLE_OPPS, A7_PROFILE, LITTLE_POWER, LITTLE_AREA)


def fft_acc(pe_id, i):
    return pe(pe_id, f"fft-acc-{i}", "accelerator", "fft-acc", "fft", 1,
              ACC_OPPS, FFT_ACC_PROFILE, ACC_POWER, FFT_AREA, "performance")


def viterbi_acc(pe_id, i):
    return pe(pe_id, f"viterbi-acc-{i}", "accelerator", "viterbi-acc", "viterbi",
              1, ACC_OPPS, VITERBI_ACC_PROFILE, ACC_POWER, VITERBI_AREA,
              "performance")


def scrambler_acc(pe_id, i):
    # Dual-stream block: two frames scramble concurrently.
    return pe(pe_id, f"scrambler-acc-{i}", "accelerator", "scrambler-acc",
              "scrambler", 2, ACC_OPPS, SCRAMBLER_ACC_PROFILE, ACC_POWER,
              SCRAMBLER_AREA, "performance")


def cores_8():
    pes = [big_core(i, i) for i in range(4)]
    pes += [little_core(4 + i, i) for i in range(4)]
    return pes


def soc16():
    pes = cores_8()
    next_id = 8
    for i in range(2):
        pes.append(scrambler_acc(next_id, i)); next_id += 1
    for i in range(4):
        pes.append(fft_acc(next_id, i)); next_id += 1
    for i in range(2):
        pes.append(viterbi_acc(next_id, i)); next_id += 1
    return {
        "name": "soc16",
        "pes": pes,
        "noc": NOC,
        "dram": DRAM,
        "uncore_area_mm2": UNCORE_AREA,
        "dtpm_epoch_us": 20000.0,
        "thermal": THERMAL,
    }


def dse_config(cfg_id, n_fft, n_viterbi):
    pes = cores_8()
    next_id = 8
    for i in range(n_fft):
        pes.append(fft_acc(next_id, i)); next_id += 1
    for i in range(n_viterbi):
        pes.append(viterbi_acc(next_id, i)); next_id += 1
    return {
        "name": f"dse-cfg{cfg_id}",
        "pes": pes,
        "noc": NOC,
        "dram": DRAM,
        "uncore_area_mm2": UNCORE_AREA,
        "dtpm_epoch_us": 20000.0,
        "thermal": THERMAL,
    }


def canonical_soc():
    profile_rows = {
        "P0": [14, 13, 11, 13, 12, 13, 7, 5, 18, 21],
        "P1": [16, 19, 13, 8, 13, 16, 15, 11, 12, 7],
        "P2": [9, 18, 19, 17, 10, 9, 11, 14, 29, 16],
    }
    pes = []
    for pe_id, (name, row) in enumerate(profile_rows.items()):
        profile = {f"canon-{i}": row[i] for i in range(10)}
        pes.append(pe(pe_id, name, "general-core", "canon-core", "canon", 1,
                      [{"voltage_v": 1.0, "frequency_mhz": 1000}], profile,
                      {"cap_f": 1.0e-10, "activity": 1.0,
                       "leak_a": 1.0e-4, "leak_b": 0.01},
                      1.0, "performance"))
    return {
        "name": "canonical",
        "pes": pes,
        "noc": {"bandwidth_bytes_per_us": 1,
                "load_latency_us": [[0.0, 0.0], [1.0, 0.0]],
                "link_capacity": 64},
        "dram": {"window_us": 100.0, "table": [[0.0, 0.0], [1.0e9, 0.0]]},
        "uncore_area_mm2": 0.0,
        "dtpm_epoch_us": 20000.0,
        "thermal": {"default": THERMAL["default"]},
    }


WORKLOADS = {
    "wl_fig11a.json": {"name": "tx-light-rx-heavy",
                       "mixture": {"wifi-tx": 0.2, "wifi-rx": 0.8},
                       "rate_jobs_per_ms": 1.0, "jobs": 1000, "seed": 42},
    "wl_fig11b.json": {"name": "tx-heavy-rx-light",
                       "mixture": {"wifi-tx": 0.8, "wifi-rx": 0.2},
                       "rate_jobs_per_ms": 1.0, "jobs": 1000, "seed": 42},
    "wl_fig11c.json": {"name": "radar-mix",
                       "mixture": {"range-detection": 0.8, "pulse-doppler": 0.2},
                       "rate_jobs_per_ms": 1.0, "jobs": 1000, "seed": 42},
    "wl_fig11d.json": {"name": "all-apps",
                       "mixture": {"wifi-tx": 0.3, "wifi-rx": 0.3,
                                   "range-detection": 0.3, "pulse-doppler": 0.1},
                       "rate_jobs_per_ms": 1.0, "jobs": 1000, "seed": 42},
    "wl_dse.json": {"name": "domain-dse",
                       "mixture": {"wifi-tx": 0.45, "wifi-rx": 0.45,
                                   "pulse-doppler": 0.1},
                       "rate_jobs_per_ms": 1.2, "jobs": 500, "seed": 7},
}


def grid_accel_sweep():
    return {
        "comment": "Six-configuration accelerator sweep over the 8-core base.",
        "base_soc": "soc_dse_base.json",
        "workload": WORKLOADS["wl_dse.json"],
        "scheduler": "etf",
        "packing_factor": 1.0,
        "prototypes": {
            "fft": fft_acc(100, 0),
            "viterbi": viterbi_acc(101, 0),
        },
        "cells": [
            {"label": "config-1", "fft": 0, "viterbi": 0},
            {"label": "config-2", "fft": 0, "viterbi": 1},
            {"label": "config-3", "fft": 2, "viterbi": 1},
            {"label": "config-4", "fft": 4, "viterbi": 0},
            {"label": "config-5", "fft": 4, "viterbi": 1},
            {"label": "config-6", "fft": 6, "viterbi": 3},
        ],
    }


def guided_study():
    return {
        "comment": "Guided accelerator search starting from the 8-core base.",
        "workload": {"name": "guided-wifi",
                     "mixture": {"wifi-tx": 0.2, "wifi-rx": 0.8},
                     "rate_jobs_per_ms": 1.8, "jobs": 300, "seed": 11},
        "scheduler": "etf",
        "governor": "performance",
        "thresholds": [0.10, 0.50],
        "freeze_thresholds": [0.10, 0.30],
        "budget": 10,
        "candidates": {
            "fft": fft_acc(100, 0),
            "viterbi": viterbi_acc(101, 0),
        },
    }


def main():
    out = {
        "soc16.json": soc16(),
        "canonical_soc.json": canonical_soc(),
        "soc_dse_base.json": dse_config("base", 0, 0),
        "grid_accel_sweep.json": grid_accel_sweep(),
        "guided_study.json": guided_study(),
    }
    for cfg_id, (n_fft, n_vit) in enumerate(
            [(0, 0), (0, 1), (2, 1), (4, 0), (4, 1), (6, 3)], start=1):
        out[f"soc_dse_cfg{cfg_id}.json"] = dse_config(cfg_id, n_fft, n_vit)
    out.update(WORKLOADS)
    for name, payload in out.items():
        path = DATA / name
        path.write_text(json.dumps(payload, indent=2) + "\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
