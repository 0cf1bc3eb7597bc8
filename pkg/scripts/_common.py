"""Argument handling shared by the experiment scripts."""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))


def parse(description: str, cfg):
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("--packets", type=int, default=cfg.packets)
    parser.add_argument("--seed", type=int, default=cfg.seed)
    parser.add_argument("--workers", type=int, default=cfg.workers)
    parser.add_argument("--out", default="results", help="output directory")
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)
    return replace(cfg, packets=args.packets, seed=args.seed, workers=args.workers), args.out
