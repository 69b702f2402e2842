"""Command-line entry point.

The CLI is a thin client of the HTTP service: every subcommand builds a
request and posts it. By default the service runs in-process over an ASGI
transport, so no daemon is needed; point ``--server`` (or GAZE_DYN_SERVER) at
a running ``gazedyn serve`` instance to execute on a remote host, in which
case all paths refer to that host's filesystem.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import os
import sys
from typing import Optional

import httpx

log = logging.getLogger("gazedyn")


class ServiceError(RuntimeError):
    pass


class _InProcessTransport(httpx.BaseTransport):
    """Sync bridge to an ASGI app; each request runs on a private event loop."""

    def __init__(self, app):
        self._transport = httpx.ASGITransport(app=app)

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        async def _dispatch() -> tuple[httpx.Response, bytes]:
            response = await self._transport.handle_async_request(request)
            content = await response.aread()
            await response.aclose()
            return response, content

        response, content = asyncio.run(_dispatch())
        return httpx.Response(
            status_code=response.status_code,
            headers=response.headers,
            content=content,
            request=request,
        )

    def close(self) -> None:
        pass


class ServiceClient:
    """Posts requests either to a remote server or an in-process app."""

    def __init__(self, base_url: Optional[str] = None):
        if base_url:
            self._client = httpx.Client(base_url=base_url, timeout=600.0)
        else:
            from .service import create_app

            self._client = httpx.Client(
                transport=_InProcessTransport(create_app()),
                base_url="http://gazedyn.internal",
                timeout=600.0,
            )

    def post(self, path: str, payload: dict) -> dict:
        try:
            response = self._client.post(path, json=payload)
        except httpx.HTTPError as exc:
            raise ServiceError(f"request to {path} failed: {exc}") from exc
        if response.status_code >= 400:
            try:
                detail = response.json().get("detail", response.text)
            except ValueError:
                detail = response.text
            raise ServiceError(f"{path}: {detail}")
        return response.json()

    def close(self) -> None:
        self._client.close()


def _add_feature_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--mode",
        choices=["ga", "gd", "gdgf"],
        default="ga",
        help="feature mode: gaze accumulation, glance duration, or duration+frequency",
    )
    parser.add_argument(
        "--window", type=float, default=5.0, metavar="SECONDS",
        help="feature window length (default 5.0)",
    )
    parser.add_argument(
        "--debounce-w", type=int, default=6, metavar="FRAMES",
        help="majority-vote debounce window (default 6)",
    )
    parser.add_argument(
        "--ridge", type=float, default=1e-6, metavar="EPS",
        help="covariance ridge applied at solve time (default 1e-6)",
    )


def _feature_payload(args: argparse.Namespace) -> dict:
    return {
        "mode": args.mode,
        "window_seconds": args.window,
        "debounce_w": args.debounce_w,
        "ridge_epsilon": args.ridge,
    }


def _add_source_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--lc-source",
        choices=["annotated", "estimated"],
        default="annotated",
        help="gaze stream for lane-change training windows",
    )
    parser.add_argument(
        "--lk-source",
        choices=["annotated", "estimated"],
        default="estimated",
        help="gaze stream for lane-keeping training segments",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gazedyn",
        description=(
            "Glance descriptors, gaze-behavior models, and lane-change "
            "prediction over gaze-zone scanpaths."
        ),
    )
    parser.add_argument(
        "--server",
        default=os.environ.get("GAZE_DYN_SERVER"),
        help="base URL of a running service; default runs in-process",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic multi-driver corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--drivers", type=int, default=7)
    p.add_argument("--fps", type=int, default=30)
    p.add_argument(
        "--noise",
        default="default",
        help="'default', 'identity', or a noise-channel JSON file",
    )
    p.add_argument("--templates", default=None, help="behavior-templates JSON file")

    p = sub.add_parser("extract", help="feature vectors for sliding windows")
    p.add_argument("--scanpath", required=True, help="scanpath JSON file")
    p.add_argument("--stride-frames", type=int, default=1)
    p.add_argument("--out", default=None, help="features CSV path")
    _add_feature_flags(p)

    p = sub.add_parser("fit", help="fit the three maneuver models on a corpus")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="model JSON path")
    _add_feature_flags(p)
    _add_source_flags(p)

    p = sub.add_parser("predict", help="classify sliding windows of a scanpath")
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--scanpath", required=True, help="scanpath JSON file")
    p.add_argument("--stride-frames", type=int, default=1)
    p.add_argument("--out", default=None, help="predictions CSV path")

    p = sub.add_parser("eval", help="evaluate prediction or gaze quality")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory for CSVs")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--cv", action="store_true", help="leave-one-driver-out")
    group.add_argument("--model", default=None, help="evaluate a persisted model file")
    group.add_argument(
        "--gaze-quality",
        action="store_true",
        help="accumulation-quality metrics from truth/estimate pairs",
    )
    p.add_argument("--sweep", type=float, default=5.0, metavar="SECONDS")
    p.add_argument("--quality-stride", type=float, default=1.0, metavar="SECONDS")
    _add_feature_flags(p)
    _add_source_flags(p)

    p = sub.add_parser("cv", help="shorthand for eval --cv")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sweep", type=float, default=5.0, metavar="SECONDS")
    _add_feature_flags(p)
    _add_source_flags(p)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _print_recall_summary(summary: dict) -> None:
    recall = summary.get("recall", {})
    mode = summary["resolved_config"]["features"]["mode"]
    print(f"recall summary (mode {mode}):")
    print(f"  {'class':<18} {'t = -1.0 s':>12} {'t = 0.0 s':>12}")
    for label, values in recall.items():
        cells = []
        for key in ("-1.0", "0.0"):
            v = values.get(key)
            cells.append("   n/a" if v is None else f"{v:12.3f}")
        print(f"  {label:<18} {cells[0]:>12} {cells[1]:>12}")
    acc = summary.get("decision_weighted_accuracy")
    if acc is not None:
        print(f"  decision weighted accuracy: {acc:.3f}")


def _run_command(args: argparse.Namespace, client: ServiceClient) -> int:
    if args.command == "synth":
        payload = {
            "out_dir": args.out,
            "seed": args.seed,
            "drivers": args.drivers,
            "fps": args.fps,
            "noise": args.noise,
            "templates_path": args.templates,
        }
        summary = client.post("/synth", payload)
        log.info("resolved config: %s", json.dumps(summary["resolved_config"], sort_keys=True))
        print(
            f"wrote {summary['drives']} drives / {summary['drivers']} drivers "
            f"to {summary['manifest']}"
        )
        print(f"events: {summary['events']}")
        return 0

    if args.command == "extract":
        payload = {
            "scanpath_path": args.scanpath,
            "stride_frames": args.stride_frames,
            "out_path": args.out,
            "features": _feature_payload(args),
        }
        summary = client.post("/features/extract", payload)
        log.info("resolved config: %s", json.dumps(summary["resolved_config"], sort_keys=True))
        where = summary["out_path"] or "(not written)"
        print(f"extracted {summary['n_windows']} windows of dim {summary['dim']}: {where}")
        return 0

    if args.command == "fit":
        payload = {
            "manifest": args.manifest,
            "out_path": args.out,
            "features": _feature_payload(args),
            "lc_source": args.lc_source,
            "lk_source": args.lk_source,
        }
        summary = client.post("/fit", payload)
        log.info("resolved config: %s", json.dumps(summary["resolved_config"], sort_keys=True))
        print(f"fitted models ({summary['dim']}-dim) -> {summary['model_path']}")
        print(f"training events: {summary['classes']}")
        return 0

    if args.command == "predict":
        payload = {
            "model_path": args.model,
            "scanpath_path": args.scanpath,
            "stride_frames": args.stride_frames,
            "out_path": args.out,
        }
        summary = client.post("/predict", payload)
        log.info("resolved config: %s", json.dumps(summary["resolved_config"], sort_keys=True))
        where = summary["out_path"] or "(not written)"
        print(f"classified {summary['n_windows']} windows: {where}")
        return 0

    if args.command in ("eval", "cv"):
        if args.command == "cv" or args.cv:
            payload = {
                "manifest": args.manifest,
                "out_dir": args.out,
                "features": _feature_payload(args),
                "lc_source": args.lc_source,
                "lk_source": args.lk_source,
                "sweep_seconds": args.sweep,
            }
            summary = client.post("/eval/cv", payload)
            log.info(
                "resolved config: %s", json.dumps(summary["resolved_config"], sort_keys=True)
            )
            print(f"{summary['folds']} folds -> {summary['out_dir']}: {summary['files']}")
            _print_recall_summary(summary)
            return 0
        if args.gaze_quality:
            payload = {
                "manifest": args.manifest,
                "out_dir": args.out,
                "window_seconds": args.window,
                "stride_seconds": args.quality_stride,
            }
            summary = client.post("/eval/gaze-quality", payload)
            log.info(
                "resolved config: %s", json.dumps(summary["resolved_config"], sort_keys=True)
            )
            print(
                f"{summary['n_windows']} windows from {summary['n_pairs']} pairs -> "
                f"{summary['out_dir']}: {summary['files']}"
            )
            print(f"zone weighted accuracy: {summary['zone_weighted_accuracy']:.3f}")
            return 0
        payload = {
            "manifest": args.manifest,
            "model_path": args.model,
            "out_dir": args.out,
            "sweep_seconds": args.sweep,
        }
        summary = client.post("/eval/model", payload)
        log.info("resolved config: %s", json.dumps(summary["resolved_config"], sort_keys=True))
        print(f"evaluated {args.model} -> {summary['out_dir']}: {summary['files']}")
        _print_recall_summary(summary)
        return 0

    raise AssertionError(f"unhandled command {args.command!r}")


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0
    client = ServiceClient(args.server)
    try:
        return _run_command(args, client)
    except ServiceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # in-process app errors surface here unheld
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        client.close()


if __name__ == "__main__":
    sys.exit(main())
