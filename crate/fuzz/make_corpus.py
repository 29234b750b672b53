#!/usr/bin/env python3
"""Writes the seed corpus under corpus/<target>/."""
import json
import os
import struct

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "corpus")


def put(target, name, data):
    d = os.path.join(ROOT, target)
    os.makedirs(d, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    with open(os.path.join(d, name), "wb") as f:
        f.write(data)


def rvol(dims, nc, dtype, payload):
    return b"RVL1" + struct.pack("<5I", *dims, nc, dtype) + payload


put("rvol", "f32_2x2x1", rvol((2, 2, 1), 1, 1, struct.pack("<4f", 0, 1.5, -2, 3)))
put("rvol", "f64_1x1x2_2ch", rvol((1, 1, 2), 2, 2, struct.pack("<4d", 1, 2, 3, 4)))
put("rvol", "u8_labels", rvol((3, 1, 1), 1, 3, bytes([0, 2, 4])))
put("rvol", "truncated", rvol((2, 2, 2), 1, 2, b"\0" * 5))


def nifti(dims, datatype, bitpix, payload, slope=0.0, inter=0.0, endian="<"):
    h = bytearray(352)
    struct.pack_into(endian + "i", h, 0, 348)
    struct.pack_into(endian + "8h", h, 40, 3, *dims, 1, 1, 1, 1)
    struct.pack_into(endian + "2h", h, 70, datatype, bitpix)
    struct.pack_into(endian + "4f", h, 76, 1, 1, 1, 1)
    struct.pack_into(endian + "3f", h, 108, 352.0, slope, inter)
    h[344:348] = b"n+1\0"
    return bytes(h) + payload


put("nifti1", "f32_scaled", nifti((2, 1, 1), 16, 32, struct.pack("<2f", 1, 2), 2.0, 1.0))
put("nifti1", "i16_big_endian", nifti((2, 1, 1), 4, 16, struct.pack(">2h", -5, 9), endian=">"))
put("nifti1", "u8", nifti((1, 2, 1), 2, 8, bytes([3, 4])))
put("nifti1", "gzip", b"\x1f\x8b\x08\x00")


def checkpoint(sizes, features, extra=""):
    n = sum((a + 1) * b for a, b in zip(sizes, sizes[1:]))
    head = "gbmseg-checkpoint\nformat_version = 1\nlayer_sizes = %s\n" % ",".join(map(str, sizes))
    head += "".join("feature = %s\n" % f for f in features)
    head += extra
    head += "payload_bytes = %d\nend\n" % (8 * n)
    return head.encode() + struct.pack("<%dd" % n, *[0.01 * i for i in range(n)])


put("checkpoint", "tiny", checkpoint([2, 3, 5], ["a:intensity", "a:gradient"]))
put("checkpoint", "with_config", checkpoint(
    [1, 5], [],
    'train_config = {"learning_rate":0.01,"momentum":0.9,"batch_size":256,"epochs":10,'
    '"rng_seed":0,"class_balance":true,"l2":0.0001,"init":"glorot","hidden_layers":[]}\n'
    "loss_trace = 1.6094379124341003,0.5\n"))

put("bank_manifest", "two", json.dumps({
    "format": "gbmseg-bank/1", "support": 9, "zero_dc": True,
    "filters": [{"file": "filter_00.rvol", "sigma": 1.4142135623730951, "kind": "dog"},
                {"file": "filter_01.rvol", "sigma": 2.0, "kind": "dog"}]}, indent=2))
put("bank_manifest", "bad_name", '{"format":"gbmseg-bank/1","support":3,"zero_dc":false,'
    '"filters":[{"file":"../x","sigma":1,"kind":"dog"}]}')

put("case_manifest", "full", "case_id = p7\nchannel t1pre = t1pre.rvol\nchannel flair = flair.nii\n"
    "labels = labels.lbl\nnote = synthetic phantom, seed 7\n")
put("case_manifest", "comments", "# a case\ncase_id = x\n\nchannel a = a.rvol\r\n")

put("feature_manifest", "two", "format = gbmseg-features/1\ncount = 2\n"
    "feature = t1pre:intensity\nfeature = t1pre:dog0[sigma=1.414214]:gradient\n")

put("pipeline_config", "full", "dog.sigmas = 1,2,4\ndog.support = 9\ndog.zero_dc = true\n"
    "train.epochs = 3\ntrain.init = zero\ntrain.hidden_layers = 10,10\n"
    "sampling.max_per_class = all\nfeatures.dtype = f64\nthreads = 2\npaths.filters = bank\n")
put("pipeline_config", "unknown", "train.epoch = 3\n")

put("report_csv", "report", "case_id,region,dice\np1,whole,0.95\np1,core,0.8\np1,active,NA\n")
put("report_csv", "bad_region", "case_id,region,dice\np1,lobe,0.5\n")
