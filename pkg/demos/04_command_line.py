"""
The pipeline from the command line
==================================

Each stage reads and writes plain files, so stages can be re-run on their own.
This script drives the CLI in-process; the shell equivalent is shown alongside.
"""

import json
import tempfile
from pathlib import Path

from faceqa.cli import main

out = Path(tempfile.mkdtemp(prefix="faceqa-demo-"))

# faceqa simulate --subjects 30 --images-per-subject 6 --dim 16 --seed 3 --out DIR
main(["simulate", "--subjects", "30", "--images-per-subject", "6", "--dim", "16",
      "--seed", "3", "--out", str(out)])
emb = str(out / "embeddings.jsonl")

# faceqa partition --embeddings E --policy first --out partition.json
main(["partition", "--embeddings", emb, "--out", str(out / "partition.json")])
# faceqa label --embeddings E --manifest partition.json --out labels.csv
main(["label", "--embeddings", emb, "--manifest", str(out / "partition.json"),
      "--out", str(out / "labels.csv")])
# faceqa train --embeddings E --labels labels.csv --epochs 30 --out DIR
main(["train", "--embeddings", emb, "--labels", str(out / "labels.csv"), "--out", str(out)])
# faceqa score --model model.json --embeddings E --out scores.csv
main(["score", "--model", str(out / "model.json"), "--embeddings", emb,
      "--out", str(out / "scores.csv")])
# faceqa eval --embeddings E --grid-size 512 --bins 32 --out DIR
main(["eval", "--embeddings", emb, "--out", str(out)])

print(sorted(p.name for p in out.iterdir()))
print(json.loads((out / "eer.json").read_text()))

###############################################################################
# The same run from a single JSON config: ``faceqa pipeline cfg.json``.
cfg = out / "cfg.json"
cfg.write_text(json.dumps({"seed": 3, "simulate": {"subjects": 30, "images_per_subject": 6,
                                                   "dim": 16}, "out": "pipeline"}))
main(["pipeline", str(cfg)])
print(json.loads((out / "pipeline" / "eer.json").read_text()))
