#!/usr/bin/env python3
"""Export pretrained timm backbone weights to the .cdow tensor archive read by the expert loader.

Layout: b"CDOARCH1", uint64 little-endian header length, UTF-8 JSON header
{"meta": {...}, "tensors": [{"name", "dims", "offset"}]}, then float32 little-endian payload.
"""

import argparse
import json
import struct
import sys
from pathlib import Path

MODELS = ("hrnet_w18", "hrnet_w32", "hrnet_w48", "resnet18", "resnet34", "resnet50", "wide_resnet50_2")


def write_archive(path: Path, tensors, meta):
    import numpy as np

    entries, blobs, offset = [], [], 0
    for name, array in tensors:
        data = np.ascontiguousarray(array, dtype="<f4")
        entries.append({"name": name, "dims": list(data.shape), "offset": offset})
        blobs.append(data.tobytes())
        offset += data.size
    header = json.dumps({"meta": meta, "tensors": entries}, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(b"CDOARCH1")
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for blob in blobs:
            f.write(blob)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--model", required=True, choices=MODELS)
    parser.add_argument("--out", type=Path, default=Path("weights"))
    parser.add_argument("--no-pretrained", action="store_true", help="export random init (format tests)")
    args = parser.parse_args(argv)

    import timm
    import torch

    model = timm.create_model(args.model, pretrained=not args.no_pretrained)
    model.eval()
    tensors = [
        (name, t.detach().to(torch.float32).cpu().numpy())
        for name, t in model.state_dict().items()
        if t.is_floating_point()  # drops num_batches_tracked
    ]
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"{args.model}.cdow"
    write_archive(path, tensors, {"kind": "expert", "source": "timm", "model": args.model,
                                  "pretrained": not args.no_pretrained})
    print(f"{path}: {len(tensors)} tensors")
    return 0


if __name__ == "__main__":
    sys.exit(main())
