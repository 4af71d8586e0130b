"""Command line entry point."""

import argparse
import sys
from dataclasses import fields

from model_server.config import ConfigError, ServerConfig, load_config
from model_server.service import serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="model-server",
        description="Serve a classifier or masked LM behind the oracle wire protocol",
    )
    parser.add_argument("--config", help="JSON file with ServerConfig fields")
    parser.add_argument("--model", help="model directory or hub identifier")
    parser.add_argument("--role", choices=["classifier", "masked-lm"])
    parser.add_argument("--device")
    parser.add_argument("--max-batch", type=int, dest="max_batch")
    parser.add_argument("--host")
    parser.add_argument("--port", type=int)
    parser.add_argument("--labels", help="comma-separated label names, index order")
    return parser


def resolve(args: argparse.Namespace) -> ServerConfig:
    """Config file first, flags override."""
    values = {}
    if args.config:
        base = load_config(args.config)
        values = {f.name: getattr(base, f.name) for f in fields(ServerConfig)}
    for name in ("model", "role", "device", "max_batch", "host", "port"):
        if getattr(args, name) is not None:
            values[name] = getattr(args, name)
    if args.labels is not None:
        values["labels"] = tuple(x.strip() for x in args.labels.split(","))
    if "model" not in values or "role" not in values:
        raise ConfigError("--model and --role are required (flags or config file)")
    return ServerConfig(**values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve(args)
        serve(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 64
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
