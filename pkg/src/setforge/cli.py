"""Command line interface.

Subcommands:
    generate         run the full pipeline from a description or a params file
    validate-params  check a structured-parameter file without generating
    index-catalog    precompute the embedding sidecar for a catalog
    demo             generate the built-in demo scene (shipped fixtures + catalog)
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline
from .agents import StructuredParams, validate_adjacency, validate_room_cells
from .pipeline import PipelineConfig, PipelineError
from .retrieval import MockEmbedder, load_catalog, write_embedding_sidecar


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="pipeline config JSON file")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--formats", help="comma-separated subset of json,obj,svg")
    parser.add_argument("--seed", type=int, help="random seed (reserved; runs are deterministic)")


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    if getattr(args, "catalog", None):
        config.catalog_path = args.catalog
    if getattr(args, "backend", None):
        config.backend = args.backend
    if getattr(args, "fixtures", None):
        config.fixtures_path = args.fixtures
    if args.out:
        config.out_dir = args.out
    if args.formats:
        config.formats = tuple(f.strip() for f in args.formats.split(",") if f.strip())
    if args.seed is not None:
        config.random_seed = args.seed
    return config


def cmd_generate(args: argparse.Namespace) -> int:
    config = _load_config(args)
    manifest = pipeline.generate(
        config,
        description=args.input,
        params_path=args.params,
    )
    print(json.dumps(manifest, indent=2, sort_keys=True))
    return 0


def cmd_validate_params(args: argparse.Namespace) -> int:
    params = StructuredParams.from_dict(json.loads(Path(args.params).read_text(encoding="utf-8")))
    problems = [f"missing section: {name}" for name in params.missing_sections()]
    if params.structure_kind == "wall" and params.adjacency is not None and params.rooms:
        report = validate_adjacency(params.rooms, params.adjacency)
        problems.extend(report.violations)
    if params.structure_kind == "column" and params.grid is not None:
        report = validate_room_cells(params.grid, params.room_cells)
        problems.extend(report.violations)
    if problems:
        for problem in problems:
            print(f"INVALID: {problem}")
        return 1
    print("OK: parameter bundle is complete and consistent")
    return 0


def cmd_index_catalog(args: argparse.Namespace) -> int:
    catalog = load_catalog(args.catalog)
    out = args.sidecar or str(Path(args.catalog).with_suffix(".embeddings.json"))
    write_embedding_sidecar(catalog, out, MockEmbedder())
    print(f"wrote {out} ({len(catalog.records)} entries)")
    return 0


def cmd_demo(args: argparse.Namespace) -> int:
    out = args.out or "demo_out"
    manifest = pipeline.run_demo(out, kind=args.kind)
    print(json.dumps(manifest, indent=2, sort_keys=True))
    print(f"wrote artifacts to {out}/", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="setforge", description="procedural film-set scene generator")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a scene")
    _add_common(gen)
    gen.add_argument("--input", help="natural-language scene description (runs the agent chain)")
    gen.add_argument("--params", help="prebuilt structured-parameters JSON (skips the agents)")
    gen.add_argument("--backend", choices=["scripted", "remote"], help="agent backend")
    gen.add_argument("--fixtures", help="scripted-backend fixtures JSON")
    gen.add_argument("--catalog", help="asset catalog JSON")
    gen.set_defaults(func=cmd_generate)

    val = sub.add_parser("validate-params", help="validate a structured-parameters file")
    val.add_argument("params", help="structured-parameters JSON file")
    val.set_defaults(func=cmd_validate_params)

    idx = sub.add_parser("index-catalog", help="precompute catalog embeddings")
    idx.add_argument("catalog", help="catalog JSON file")
    idx.add_argument("--sidecar", help="output sidecar path")
    idx.set_defaults(func=cmd_index_catalog)

    demo = sub.add_parser("demo", help="generate the built-in demo scene")
    demo.add_argument("--out", help="output directory (default demo_out)")
    demo.add_argument("--kind", choices=["wall", "column"], default="wall")
    demo.set_defaults(func=cmd_demo)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PipelineError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
