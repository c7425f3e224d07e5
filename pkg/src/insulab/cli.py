"""Batch front end: a thin HTTP client for the experiment service.

By default the CLI talks to an in-process instance of the service over an
ASGI transport, so no server needs to be running; --server points it at a
live deployment instead.  Either way the command is just request/response
plumbing — all logic lives behind the service routes.
"""

from __future__ import annotations

import argparse
import sys

import httpx


def _client(server: str | None) -> httpx.Client:
    if server is not None:
        return httpx.Client(base_url=server, timeout=None)
    # the sync httpx client cannot drive an ASGI app directly; starlette's
    # test client is exactly that adapter (and is an httpx.Client subclass)
    from starlette.testclient import TestClient

    from .service import app
    return TestClient(app)


def _emit(messages: list[str], quiet: bool):
    if not quiet:
        for line in messages:
            print(line)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="insulab",
        description="penalized free-boundary insulation experiments")
    parser.add_argument("--server", default=None,
                        help="base URL of a running service "
                             "(default: in-process)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for verification/reporting")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress progress output")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config", help="path to the config file")

    p_resume = sub.add_parser("resume", help="continue a checkpointed run")
    p_resume.add_argument("directory", help="output directory of the run")

    p_report = sub.add_parser("report", help="print a completed run's tables")
    p_report.add_argument("directory", help="output directory of the run")

    p_oracle = sub.add_parser(
        "oracle", help="emit the radial benchmark's analytic constants")
    p_oracle.add_argument("omega_radius", type=float)
    p_oracle.add_argument("r0", type=float)
    p_oracle.add_argument("ramp_width", type=float)
    p_oracle.add_argument("height", type=float)
    p_oracle.add_argument("gamma", type=float)
    p_oracle.add_argument("--h", type=float, default=None,
                          help="grid spacing for the sampled field")
    p_oracle.add_argument("--bbox", type=float, nargs=4, default=None,
                          metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    p_oracle.add_argument("--out", default=None,
                          help="write the sampled cone field to this path")

    args = parser.parse_args(argv)

    with _client(args.server) as client:
        if args.verb == "run":
            r = client.post("/runs", json={"config": args.config,
                                           "threads": args.threads,
                                           "quiet": args.quiet})
        elif args.verb == "resume":
            r = client.post("/resume", json={"directory": args.directory,
                                             "threads": args.threads,
                                             "quiet": args.quiet})
        elif args.verb == "report":
            r = client.post("/report", json={"directory": args.directory})
        else:
            r = client.post("/oracle", json={
                "omega_radius": args.omega_radius, "r0": args.r0,
                "ramp_width": args.ramp_width, "height": args.height,
                "gamma": args.gamma, "h": args.h,
                "bbox": args.bbox, "out": args.out})
        r.raise_for_status()
        payload = r.json()

    if args.verb == "report":
        _emit(payload["messages"], args.quiet)
        if payload["exit_code"] == 0 and not args.quiet:
            for name, text in payload["tables"].items():
                print(f"== {name} ==")
                print(text, end="")
    else:
        # the service already printed progress for in-process runs; avoid
        # duplicating log lines on stdout unless talking to a remote server
        if args.server is not None or args.verb == "oracle":
            _emit(payload["messages"], args.quiet)
    return int(payload["exit_code"])


if __name__ == "__main__":
    sys.exit(main())
