import argparse
import logging
import sys

from ..errors import BindFailure, ConfigInvalid
from .config import load_config
from .server import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="wasmless-gateway", description="Serve the function gateway over HTTP.")
    parser.add_argument("--config", help="TOML config file; WASMLESS_* env vars override it")
    parser.add_argument("--listen", help="host:port (overrides config and env)")
    parser.add_argument("--data-dir", help="data directory (overrides config and env)")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    overrides = {}
    if args.listen:
        overrides["listen_addr"] = args.listen
    if args.data_dir:
        overrides["data_dir"] = args.data_dir
    try:
        serve(load_config(args.config, **overrides))
    except (ConfigInvalid, BindFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
