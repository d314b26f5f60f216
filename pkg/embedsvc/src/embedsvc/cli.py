"""Launch the sidecar with uvicorn."""

from __future__ import annotations

import argparse

from embedsvc.app import DEFAULT_EMBED_MODEL, DEFAULT_NLI_MODEL, ServiceConfig, create_app


def parse_args(argv: list[str] | None = None) -> ServiceConfig:
    parser = argparse.ArgumentParser(prog="embedsvc", description=__doc__)
    parser.add_argument("--embed-model", default=DEFAULT_EMBED_MODEL)
    parser.add_argument("--nli-model", default=DEFAULT_NLI_MODEL)
    parser.add_argument("--port", type=int, default=8900)
    parser.add_argument("--max-batch", type=int, default=256)
    parser.add_argument("--test-mode", action="store_true",
                        help="Serve deterministic seeded-hash vectors and exact-match NLI.")
    parser.add_argument("--dim", type=int, default=512, help="Vector dimension in test mode.")
    parser.add_argument("--seed", type=int, default=0, help="Hash seed in test mode.")
    args = parser.parse_args(argv)
    return ServiceConfig(
        embed_model=args.embed_model,
        nli_model=args.nli_model,
        port=args.port,
        max_batch=args.max_batch,
        test_mode=args.test_mode,
        dim=args.dim,
        seed=args.seed,
    )


def main(argv: list[str] | None = None) -> None:
    import uvicorn

    config = parse_args(argv)
    uvicorn.run(create_app(config), host="127.0.0.1", port=config.port)


if __name__ == "__main__":
    main()
