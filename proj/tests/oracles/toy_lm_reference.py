# Copyright 2026 The lrag Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
# ==============================================================================
"""Straight-line numpy forward pass of the toy LM, used to freeze golden traces.

Usage: toy_lm_reference.py MODEL.st OUT.json TOKEN [TOKEN ...]
"""

import json
import math
import struct
import sys

import numpy as np


def load(path):
    with open(path, "rb") as f:
        raw = f.read()
    (n,) = struct.unpack("<Q", raw[:8])
    header = json.loads(raw[8:8 + n])
    meta = header.pop("__metadata__", {})
    body = raw[8 + n:]
    tensors = {}
    for name, e in header.items():
        dt = {"F32": "<f4", "F64": "<f8"}[e["dtype"]]
        lo, hi = e["data_offsets"]
        tensors[name] = np.frombuffer(body[lo:hi], dtype=dt).astype(np.float64).reshape(e["shape"])
    return tensors, json.loads(meta["config"])


def rms(x, g):
    return x / np.sqrt(np.mean(x * x, axis=-1, keepdims=True) + 1e-5) * g


def gelu(x):
    return np.vectorize(lambda v: 0.5 * v * (1.0 + math.erf(v / math.sqrt(2.0))))(x)


def forward(t, cfg, tokens):
    d, heads = cfg["d_model"], cfg["n_heads"]
    dh = d // heads
    n = len(tokens)
    pos = np.arange(n)[:, None]
    i = np.arange(d)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d)
    pe = np.where(i % 2 == 0, np.sin(angle), np.cos(angle))
    x = t["embedding"][tokens] + pe
    states = [x[-1].copy()]
    mask = np.tril(np.ones((n, n), dtype=bool))
    for l in range(cfg["n_layers"]):
        p = lambda k: t["layer.%d.%s" % (l, k)]
        h = rms(x, p("norm1").reshape(-1))
        q, k, v = h @ p("w_q"), h @ p("w_k"), h @ p("w_v")
        out = np.zeros_like(x)
        for hd in range(heads):
            s = slice(hd * dh, (hd + 1) * dh)
            logits = q[:, s] @ k[:, s].T / math.sqrt(dh)
            logits = np.where(mask, logits, -np.inf)
            w = np.exp(logits - logits.max(axis=1, keepdims=True))
            w /= w.sum(axis=1, keepdims=True)
            out[:, s] = w @ v[:, s]
        x = x + out @ p("w_o")
        x = x + gelu(rms(x, p("norm2").reshape(-1)) @ p("mlp_in")) @ p("mlp_out")
        states.append(x[-1].copy())
    logits = rms(x[-1], t["final_norm"].reshape(-1)) @ t["unembedding"]
    return states, logits


def main():
    tensors, cfg = load(sys.argv[1])
    tokens = [int(a) for a in sys.argv[3:]]
    states, logits = forward(tensors, cfg, tokens)
    with open(sys.argv[2], "w") as f:
        json.dump({"config": cfg, "tokens": tokens, "position": len(tokens) - 1,
                   "states": [s.tolist() for s in states], "final_logits": logits.tolist()}, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
