"""Pass-through for the Node bindings: one JSON request on stdin, one JSON
result on stdout. All numerics happen in the mono3d library; this file only
marshals arguments. Errors print the library's diagnostic to stderr and exit
nonzero so the caller can surface them as exceptions."""
import json
import sys

import numpy as np

from mono3d import (DEFAULT_MEAN_DIMS, Box3D, CalibrationSet, DecoderConfig,
                    DepthEstimate, Mono3DError, ads_from_matches,
                    assemble_box, generate_mask)


def _calib(data) -> CalibrationSet:
    return CalibrationSet(np.asarray(data["projection"], dtype=float),
                          np.asarray(data["rect"], dtype=float),
                          np.asarray(data["velo_to_cam"], dtype=float))


def _op_ads_from_matches(args):
    value = ads_from_matches(args["deltas"], args["tp_flags"],
                             args["det_counts_per_recall"])
    return {"value": value}


def _op_generate_mask(args):
    box = Box3D(tuple(args["box"]["location"]),
                tuple(args["box"]["dimensions"]), args["box"]["yaw"])
    grid = generate_mask(box, np.asarray(args["cloud"], dtype=float),
                         tuple(args["roi"]), args["s"],
                         _calib(args["calib"]), args["seed"])
    return {"size": grid.size, "labels": grid.labels.tolist()}


def _op_decode_box(args):
    mean_dims = dict(DEFAULT_MEAN_DIMS)
    for name, dims in args.get("mean_dims", {}).items():
        mean_dims[name] = tuple(dims)
    config = DecoderConfig(mean_dims, num_bins=args.get("num_bins", 4))
    box = assemble_box(tuple(args["center2d"]),
                       [DepthEstimate(z, sigma) for z, sigma in args["depth_estimates"]],
                       tuple(args["dim_deltas"]), args["bin_logits"],
                       [tuple(sc) for sc in args["sincos"]],
                       args["class_name"], _calib(args["calib"]), config)
    return {"location": list(box.location),
            "dimensions": list(box.dimensions),
            "yaw": box.yaw}


OPS = {
    "ads_from_matches": _op_ads_from_matches,
    "generate_mask": _op_generate_mask,
    "decode_box": _op_decode_box,
}


def main() -> int:
    payload = json.load(sys.stdin)
    op = payload.get("op")
    if op not in OPS:
        print(f"unknown operation {op!r}", file=sys.stderr)
        return 64
    try:
        result = OPS[op](payload.get("args", {}))
    except Mono3DError as exc:
        print(str(exc), file=sys.stderr)
        return 4
    json.dump(result, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
