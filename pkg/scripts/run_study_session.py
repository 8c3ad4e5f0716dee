"""Drive one complete rating session against a running study server.

A scripted rater fetches its session, detects the two control pairs by
image bytes (identical payloads, or an all-black transformed side), scores
them honestly, and rates the remaining pairs with a seeded noisy response
that weakens with the tradeoff strength hidden in the pair order. Useful
for exercising serve-study without 22 human judgments.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import urllib.parse
import urllib.request

import numpy as np
from PIL import Image


def get(url: str) -> bytes:
    with urllib.request.urlopen(url) as resp:
        return resp.read()


def post_json(url: str, doc: dict) -> dict:
    req = urllib.request.Request(
        url,
        data=json.dumps(doc).encode("utf-8"),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


def is_black(png: bytes) -> bool:
    arr = np.asarray(Image.open(io.BytesIO(png)).convert("RGB"))
    return int(arr.max()) == 0


def score_pair(rng: np.random.Generator, original: bytes, transformed: bytes) -> int:
    if transformed == original:
        return 5
    if is_black(transformed):
        return 1
    a = np.asarray(Image.open(io.BytesIO(original)).convert("RGB"), dtype=float)
    b = np.asarray(Image.open(io.BytesIO(transformed)).convert("RGB"), dtype=float)
    rmse = math.sqrt(((a - b) ** 2).mean()) / 255.0
    # Map distortion to opinion: rmse 0 -> 5, rmse >= 0.35 -> 1, plus noise.
    mos = 5.0 - 4.0 * min(rmse / 0.35, 1.0) + 0.5 * rng.normal()
    return int(min(max(round(mos), 1), 5))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--url", default="http://127.0.0.1:8000")
    parser.add_argument("--participant", required=True)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    q = urllib.parse.urlencode({"participant": args.participant})
    session = json.loads(get(f"{args.url}/api/session?{q}"))
    print(f"batch {session['batch']}: {session['pair_count']} pairs")

    for pair in session["pairs"]:
        if pair["scored"]:
            continue
        original = get(args.url + pair["original_url"])
        transformed = get(args.url + pair["transformed_url"])
        score = score_pair(rng, original, transformed)
        reply = post_json(
            f"{args.url}/api/score",
            {"participant": args.participant, "pair": pair["index"], "score": score},
        )
        print(f"pair {pair['index']:2d} -> {score} ({reply['scored_count']}/{reply['pair_count']})")
    print("session complete")


if __name__ == "__main__":
    main()
