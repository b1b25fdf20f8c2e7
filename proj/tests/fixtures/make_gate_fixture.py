"""Regenerates gate_closed.json: frozen-baseline probabilities.

Run with the built module on the path, e.g.
    PYTHONPATH=build/python python3 tests/fixtures/make_gate_fixture.py
Floats are written with Python's shortest round-trip repr, so the stored
probabilities are bit-exact.
"""

import json
import pathlib

import numpy as np

import camadapt


def main():
    rng = np.random.default_rng(20240602)
    cases = []
    for d, classes, images in ((8, 3, 6), (32, 5, 10), (768, 12, 4)):
        features = rng.normal(size=(classes, d))
        names = [f"class{c}" for c in range(classes)]
        prompts = camadapt.PromptTable(names, list(features))
        imgs = rng.normal(size=(images, d))
        imgs /= np.linalg.norm(imgs, axis=1, keepdims=True)
        for tau in (0.01, 0.5):
            probs = [camadapt.classify_frozen(prompts, img, tau)[1].tolist() for img in imgs]
            cases.append({
                "d": d,
                "tau": tau,
                "names": names,
                "features": features.tolist(),
                "images": imgs.tolist(),
                "probs": probs,
            })
    doc = {"generator": "make_gate_fixture.py", "cases": cases}
    out = pathlib.Path(__file__).with_name("gate_closed.json")
    out.write_text(json.dumps(doc) + "\n")


if __name__ == "__main__":
    main()
